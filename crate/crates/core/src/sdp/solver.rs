//! Primal-dual interior-point method (HKM direction, Mehrotra predictor-corrector).
//!
//! The feasibility problem is posed as `maximize −t` over `y = (z, t)` with
//! block slacks `tI − E(x) ⪰ 0` for `⪯`-blocks and `E(x) + tI ⪰ 0` for
//! `⪰`-blocks, where `x = x₀ + N z` parametrizes the equality constraints.
//! Nonnegative unknowns, a box `|z_p| ≤ R` and a floor `t ≥ t_min` are
//! linear rows.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::problem::{SdpProblem, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    Inaccurate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Accept when the recomputed `t* ≤ margin_accept`.
    pub margin_accept: f64,
    pub equality_tol: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Optimality level accepted when iterates stop improving.
    pub stall_tolerance: f64,
    pub box_radius: f64,
    pub t_floor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            margin_accept: 1e-8,
            equality_tol: 1e-7,
            max_iterations: 200,
            tolerance: 1e-11,
            stall_tolerance: 1e-8,
            box_radius: 100.0,
            t_floor: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// One value per scalar unknown of the problem.
    pub values: Vec<f64>,
    pub status: SolveStatus,
    /// Largest block violation at `values`, recomputed from eigenvalues.
    pub t_star: f64,
    pub iterations: usize,
    pub converged: bool,
    pub box_active: bool,
    pub equality_residual: f64,
    pub runtime_ms: u128,
}

/// Affine map `x = x₀ + N z`; `map[u]` lists `(p, N_up)`.
struct Elimination {
    x0: Vec<f64>,
    map: Vec<Vec<(usize, f64)>>,
    nz: usize,
    consistent: bool,
}

fn find(parent: &mut [usize], mut u: usize) -> usize {
    while parent[u] != u {
        parent[u] = parent[parent[u]];
        u = parent[u];
    }
    u
}

fn eliminate(p: &SdpProblem) -> Elimination {
    let n = p.n_scalars();
    let mut parent: Vec<usize> = (0..n).collect();
    for e in p.equalities() {
        if let Some(&(first, _)) = e.coeffs.first() {
            for &(u, _) in &e.coeffs[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, u));
                parent[a] = b;
            }
        }
    }
    let mut comp_eqs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (ei, e) in p.equalities().iter().enumerate() {
        if let Some(&(u, _)) = e.coeffs.first() {
            let r = find(&mut parent, u);
            comp_eqs.entry(r).or_default().push(ei);
        }
    }
    let mut comp_vars: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for u in 0..n {
        let r = find(&mut parent, u);
        if comp_eqs.contains_key(&r) {
            comp_vars.entry(r).or_default().push(u);
        }
    }
    let mut x0 = vec![0.0; n];
    let mut map: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut consistent = true;
    let mut nz = 0;
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (r, vars) in &comp_vars {
        for &u in vars {
            owner[u] = Some(*r);
        }
    }
    let mut done: BTreeMap<usize, ()> = BTreeMap::new();
    for u in 0..n {
        match owner[u] {
            None => {
                map[u].push((nz, 1.0));
                nz += 1;
            }
            Some(r) if !done.contains_key(&r) => {
                done.insert(r, ());
                let vars = &comp_vars[&r];
                let eqs = &comp_eqs[&r];
                let k = vars.len();
                let rows = eqs.len().max(k);
                let mut a = DMatrix::<f64>::zeros(rows, k);
                let mut b = DVector::<f64>::zeros(rows);
                for (ri, &ei) in eqs.iter().enumerate() {
                    let e = &p.equalities()[ei];
                    for &(v, c) in &e.coeffs {
                        let col = vars.binary_search(&v).expect("variable in component");
                        a[(ri, col)] += c;
                    }
                    b[ri] = e.rhs;
                }
                let svd = a.clone().svd(true, true);
                let smax = svd.singular_values.max();
                let cut = 1e-10 * smax.max(1.0);
                let vt = svd.v_t.as_ref().expect("v_t");
                let ut = svd.u.as_ref().expect("u").transpose();
                let mut sol = DVector::zeros(k);
                for (i, &s) in svd.singular_values.iter().enumerate() {
                    if s > cut {
                        let coef = ut.row(i).dot(&b.transpose()) / s;
                        sol += vt.row(i).transpose() * coef;
                    }
                }
                if (&a * &sol - &b).norm() > 1e-9 * (1.0 + b.norm()) {
                    consistent = false;
                }
                for (li, &v) in vars.iter().enumerate() {
                    x0[v] = sol[li];
                }
                for (i, &s) in svd.singular_values.iter().enumerate() {
                    if s <= cut {
                        for (li, &v) in vars.iter().enumerate() {
                            let c = vt[(i, li)];
                            if c.abs() > 1e-15 {
                                map[v].push((nz, c));
                            }
                        }
                        nz += 1;
                    }
                }
            }
            Some(_) => {}
        }
    }
    Elimination {
        x0,
        map,
        nz,
        consistent,
    }
}

/// Dual-form data: `Z = C − Σ y_i A_i ⪰ 0`.
struct DualForm {
    sdp_c: Vec<DMatrix<f64>>,
    sdp_a: Vec<Vec<(usize, DMatrix<f64>)>>,
    lp_c: Vec<f64>,
    lp_a: Vec<Vec<(usize, f64)>>,
    ny: usize,
}

fn build_dual(p: &SdpProblem, el: &Elimination, s: &SolverSettings) -> DualForm {
    let t_idx = el.nz;
    let mut sdp_c = Vec::new();
    let mut sdp_a = Vec::new();
    for b in p.blocks() {
        let size = b.expr.size();
        let mut c0 = b.expr.constant.clone();
        let mut coef: BTreeMap<usize, DMatrix<f64>> = BTreeMap::new();
        for (u, e) in &b.expr.terms {
            if el.x0[*u] != 0.0 {
                c0 += e * el.x0[*u];
            }
            for &(pz, c) in &el.map[*u] {
                let entry = coef.entry(pz).or_insert_with(|| DMatrix::zeros(size, size));
                *entry += e * c;
            }
        }
        let sign = match b.sense {
            Sense::Nsd => 1.0,
            Sense::Psd => -1.0,
        };
        sdp_c.push(c0 * -sign);
        let mut a: Vec<(usize, DMatrix<f64>)> = coef.into_iter().map(|(pz, m)| (pz, m * sign)).collect();
        a.push((t_idx, -DMatrix::identity(size, size)));
        sdp_a.push(a);
    }
    let mut lp_c = Vec::new();
    let mut lp_a = Vec::new();
    for u in p.nonneg_indices() {
        lp_c.push(el.x0[u]);
        lp_a.push(el.map[u].iter().map(|&(pz, c)| (pz, -c)).collect());
    }
    for pz in 0..el.nz {
        lp_c.push(s.box_radius);
        lp_a.push(vec![(pz, 1.0)]);
        lp_c.push(s.box_radius);
        lp_a.push(vec![(pz, -1.0)]);
    }
    lp_c.push(-s.t_floor);
    lp_a.push(vec![(t_idx, -1.0)]);
    DualForm {
        sdp_c,
        sdp_a,
        lp_c,
        lp_a,
        ny: el.nz + 1,
    }
}

fn inner(a: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    // tr(A W) for symmetric A.
    a.iter().zip(w.transpose().iter()).map(|(x, y)| x * y).sum()
}

struct State {
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    xl: Vec<f64>,
    zl: Vec<f64>,
    y: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dxl: Vec<f64>,
    dzl: Vec<f64>,
    dy: DVector<f64>,
}

fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else { return 0.0 };
    let l = ch.l();
    let Some(linv) = l.clone().try_inverse() else { return 0.0 };
    let m = &linv * dx * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let lmin = SymmetricEigen::new(m).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Ipm<'a> {
    d: &'a DualForm,
    b: DVector<f64>,
}

impl Ipm<'_> {
    fn a_op(&self, w: &[DMatrix<f64>], wl: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.d.ny);
        for (blk, wb) in self.d.sdp_a.iter().zip(w) {
            for (i, a) in blk {
                out[*i] += inner(a, wb);
            }
        }
        for (row, &v) in self.d.lp_a.iter().zip(wl) {
            for &(i, a) in row {
                out[i] += a * v;
            }
        }
        out
    }

    fn a_adj(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let m = self
            .d
            .sdp_a
            .iter()
            .zip(&self.d.sdp_c)
            .map(|(blk, c)| {
                let mut s = DMatrix::zeros(c.nrows(), c.ncols());
                for (i, a) in blk {
                    s += a * y[*i];
                }
                s
            })
            .collect();
        let l = self
            .d
            .lp_a
            .iter()
            .map(|row| row.iter().map(|&(i, a)| a * y[i]).sum())
            .collect();
        (m, l)
    }

    fn schur(&self, st: &State, zinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let ny = self.d.ny;
        let mut m = DMatrix::zeros(ny, ny);
        for ((blk, x), zi) in self.d.sdp_a.iter().zip(&st.x).zip(zinv) {
            let g: Vec<DMatrix<f64>> = blk.iter().map(|(_, a)| x * a * zi).collect();
            for (gi, (i, _)) in g.iter().zip(blk) {
                for (j, aj) in blk {
                    m[(*i, *j)] += inner(aj, gi);
                }
            }
        }
        for ((row, &x), &z) in self.d.lp_a.iter().zip(&st.xl).zip(&st.zl) {
            let r = x / z;
            for &(i, ai) in row {
                for &(j, aj) in row {
                    m[(i, j)] += ai * aj * r;
                }
            }
        }
        (&m + m.transpose()) * 0.5
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        st: &State,
        zinv: &[DMatrix<f64>],
        solve: &dyn Fn(&DVector<f64>) -> DVector<f64>,
        rp: &DVector<f64>,
        rd: &[DMatrix<f64>],
        rdl: &[f64],
        k: &[DMatrix<f64>],
        kl: &[f64],
    ) -> Direction {
        let kz: Vec<DMatrix<f64>> = k.iter().zip(zinv).map(|(k, zi)| k * zi).collect();
        let kzl: Vec<f64> = kl.iter().zip(&st.zl).map(|(k, z)| k / z).collect();
        let xrz: Vec<DMatrix<f64>> = st
            .x
            .iter()
            .zip(rd)
            .zip(zinv)
            .map(|((x, r), zi)| x * r * zi)
            .collect();
        let xrzl: Vec<f64> = st
            .xl
            .iter()
            .zip(rdl)
            .zip(&st.zl)
            .map(|((x, r), z)| x * r / z)
            .collect();
        let rhs = rp - self.a_op(&kz, &kzl) + self.a_op(&xrz, &xrzl);
        let dy = solve(&rhs);
        let (ady, adyl) = self.a_adj(&dy);
        let dz: Vec<DMatrix<f64>> = rd.iter().zip(&ady).map(|(r, a)| r - a).collect();
        let dzl: Vec<f64> = rdl.iter().zip(&adyl).map(|(r, a)| r - a).collect();
        let dx: Vec<DMatrix<f64>> = k
            .iter()
            .zip(&st.x)
            .zip(&dz)
            .zip(zinv)
            .map(|(((k, x), dz), zi)| {
                let m = (k - x * dz) * zi;
                (&m + m.transpose()) * 0.5
            })
            .collect();
        let dxl: Vec<f64> = kl
            .iter()
            .zip(&st.xl)
            .zip(&dzl)
            .zip(&st.zl)
            .map(|(((k, x), dz), z)| (k - x * dz) / z)
            .collect();
        Direction { dx, dz, dxl, dzl, dy }
    }
}

fn steps(st: &State, d: &Direction) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (x, dx) in st.x.iter().zip(&d.dx) {
        ap = ap.min(max_step(x, dx));
    }
    for (z, dz) in st.z.iter().zip(&d.dz) {
        ad = ad.min(max_step(z, dz));
    }
    for (x, dx) in st.xl.iter().zip(&d.dxl) {
        if *dx < 0.0 {
            ap = ap.min(-x / dx);
        }
    }
    for (z, dz) in st.zl.iter().zip(&d.dzl) {
        if *dz < 0.0 {
            ad = ad.min(-z / dz);
        }
    }
    (ap, ad)
}

fn total_gap(x: &[DMatrix<f64>], z: &[DMatrix<f64>], xl: &[f64], zl: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| inner(a, b)).sum::<f64>() + xl.iter().zip(zl).map(|(a, b)| a * b).sum::<f64>()
}

fn factor(m: &DMatrix<f64>) -> Box<dyn Fn(&DVector<f64>) -> DVector<f64>> {
    let maxd = m.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg;
        }
        if let Some(ch) = Cholesky::new(mm) {
            return Box::new(move |r| ch.solve(r));
        }
        reg = if reg == 0.0 { 1e-14 * maxd } else { reg * 100.0 };
    }
    let lu = m.clone().lu();
    Box::new(move |r| lu.solve(r).unwrap_or_else(|| DVector::zeros(r.len())))
}

/// Largest violation over all blocks at `x`: `λ_max(E)` for `⪯`, `−λ_min(E)` for `⪰`.
fn block_violation(p: &SdpProblem, x: &[f64]) -> f64 {
    p.blocks()
        .iter()
        .map(|b| {
            let e = b.expr.eval(x);
            let ev = SymmetricEigen::new(e).eigenvalues;
            match b.sense {
                Sense::Nsd => ev.max(),
                Sense::Psd => -ev.min(),
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn solve(p: &SdpProblem, s: &SolverSettings) -> SdpSolution {
    let start = Instant::now();
    let el = eliminate(p);
    let d = build_dual(p, &el, s);
    let mut b = DVector::zeros(d.ny);
    b[el.nz] = -1.0;
    let ipm = Ipm { d: &d, b };

    let xi = 10.0;
    let mut st = State {
        x: d.sdp_c.iter().map(|c| DMatrix::identity(c.nrows(), c.nrows()) * xi).collect(),
        z: d.sdp_c.iter().map(|c| DMatrix::identity(c.nrows(), c.nrows()) * xi).collect(),
        xl: vec![xi; d.lp_c.len()],
        zl: vec![xi; d.lp_c.len()],
        y: DVector::zeros(d.ny),
    };
    let nu = d.sdp_c.iter().map(|c| c.nrows()).sum::<usize>() + d.lp_c.len();
    let bnorm = 1.0;
    let cnorm = d.sdp_c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt()
        + d.lp_c.iter().map(|c| c * c).sum::<f64>().sqrt();

    let mut converged = false;
    let mut iterations = 0;
    let mut history: Vec<f64> = Vec::new();
    for it in 0..s.max_iterations {
        iterations = it;
        let (ay, ayl) = ipm.a_adj(&st.y);
        let rp = &ipm.b - ipm.a_op(&st.x, &st.xl);
        let rd: Vec<DMatrix<f64>> = d
            .sdp_c
            .iter()
            .zip(&st.z)
            .zip(&ay)
            .map(|((c, z), a)| c - z - a)
            .collect();
        let rdl: Vec<f64> = d
            .lp_c
            .iter()
            .zip(&st.zl)
            .zip(&ayl)
            .map(|((c, z), a)| c - z - a)
            .collect();
        let gap = total_gap(&st.x, &st.z, &st.xl, &st.zl);
        let mu = gap / nu as f64;
        let pobj: f64 = d.sdp_c.iter().zip(&st.x).map(|(c, x)| inner(c, x)).sum::<f64>()
            + d.lp_c.iter().zip(&st.xl).map(|(c, x)| c * x).sum::<f64>();
        let dobj = ipm.b.dot(&st.y);
        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rdl.iter().map(|r| r * r).sum::<f64>()).sqrt()
            / (1.0 + cnorm);
        let rgap = gap / (1.0 + pobj.abs() + dobj.abs());
        if pinf < s.tolerance && dinf < s.tolerance && rgap < s.tolerance {
            converged = true;
            break;
        }
        // Stall: accept a looser optimality level once progress stops.
        let merit = pinf.max(dinf).max(rgap);
        history.push(merit);
        if history.len() > 10 && merit > 0.5 * history[history.len() - 11] {
            converged = merit < s.stall_tolerance;
            break;
        }
        let zinv: Vec<DMatrix<f64>> = st
            .z
            .iter()
            .map(|z| {
                let zi = z.clone().try_inverse().unwrap_or_else(|| DMatrix::identity(z.nrows(), z.nrows()));
                (&zi + zi.transpose()) * 0.5
            })
            .collect();
        let m = ipm.schur(&st, &zinv);
        let solve = factor(&m);

        let kp: Vec<DMatrix<f64>> = st.x.iter().zip(&st.z).map(|(x, z)| -(x * z)).collect();
        let kpl: Vec<f64> = st.xl.iter().zip(&st.zl).map(|(x, z)| -(x * z)).collect();
        let pred = ipm.direction(&st, &zinv, &*solve, &rp, &rd, &rdl, &kp, &kpl);
        let (ap, ad) = steps(&st, &pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let xa: Vec<DMatrix<f64>> = st.x.iter().zip(&pred.dx).map(|(x, dx)| x + dx * ap).collect();
        let za: Vec<DMatrix<f64>> = st.z.iter().zip(&pred.dz).map(|(z, dz)| z + dz * ad).collect();
        let xal: Vec<f64> = st.xl.iter().zip(&pred.dxl).map(|(x, dx)| x + dx * ap).collect();
        let zal: Vec<f64> = st.zl.iter().zip(&pred.dzl).map(|(z, dz)| z + dz * ad).collect();
        let mua = total_gap(&xa, &za, &xal, &zal) / nu as f64;
        let sigma = (mua / mu).clamp(0.0, 1.0).powi(3);

        let kc: Vec<DMatrix<f64>> = st
            .x
            .iter()
            .zip(&st.z)
            .zip(pred.dx.iter().zip(&pred.dz))
            .map(|((x, z), (dx, dz))| {
                DMatrix::identity(x.nrows(), x.nrows()) * (sigma * mu) - x * z - dx * dz
            })
            .collect();
        let kcl: Vec<f64> = st
            .xl
            .iter()
            .zip(&st.zl)
            .zip(pred.dxl.iter().zip(&pred.dzl))
            .map(|((x, z), (dx, dz))| sigma * mu - x * z - dx * dz)
            .collect();
        let corr = ipm.direction(&st, &zinv, &*solve, &rp, &rd, &rdl, &kc, &kcl);
        let (ap, ad) = steps(&st, &corr);
        let ap = (0.95 * ap).min(1.0);
        let ad = (0.95 * ad).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            break;
        }
        for (x, dx) in st.x.iter_mut().zip(&corr.dx) {
            *x += dx * ap;
        }
        for (x, dx) in st.xl.iter_mut().zip(&corr.dxl) {
            *x += dx * ap;
        }
        for (z, dz) in st.z.iter_mut().zip(&corr.dz) {
            *z += dz * ad;
            *z = (&*z + z.transpose()) * 0.5;
        }
        for (z, dz) in st.zl.iter_mut().zip(&corr.dzl) {
            *z += dz * ad;
        }
        st.y += &corr.dy * ad;
        iterations = it + 1;
    }

    let mut values = el.x0.clone();
    for (u, row) in el.map.iter().enumerate() {
        for &(pz, c) in row {
            values[u] += c * st.y[pz];
        }
    }
    let box_active = (0..el.nz).any(|pz| st.y[pz].abs() >= 0.999 * s.box_radius);
    let equality_residual = p
        .equalities()
        .iter()
        .map(|e| (e.coeffs.iter().map(|&(u, c)| c * values[u]).sum::<f64>() - e.rhs).abs())
        .fold(0.0, f64::max);
    let nonneg_violation = p
        .nonneg_indices()
        .iter()
        .map(|&u| -values[u])
        .fold(0.0, f64::max);
    let bv = if p.blocks().is_empty() { 0.0 } else { block_violation(p, &values) };
    let t_star = if nonneg_violation > 0.0 { bv.max(nonneg_violation) } else { bv };
    let status = if !el.consistent {
        SolveStatus::Infeasible
    } else if equality_residual > s.equality_tol || !t_star.is_finite() {
        SolveStatus::Inaccurate
    } else if t_star <= s.margin_accept {
        SolveStatus::Feasible
    } else if converged && !box_active {
        SolveStatus::Infeasible
    } else {
        SolveStatus::Inaccurate
    };
    SdpSolution {
        values,
        status,
        t_star,
        iterations,
        converged,
        box_active,
        equality_residual,
        runtime_ms: start.elapsed().as_millis(),
    }
}
