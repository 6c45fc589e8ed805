//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use grncert_core::model::{LambdaInstance, UncertainGrn};
use grncert_core::partition::{DomainId, Partition};
use grncert_core::polytope::HPolyhedron;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::json;

/// Vertices of a bounded polyhedron by brute force over basic feasible solutions:
/// every choice of `dim − rank(eq)` inequalities made tight together with all equalities.
pub fn bfs_vertices(h: &HPolyhedron<f64>, tol: f64) -> Vec<Vec<f64>> {
    let dim = h.dim();
    let eqs: Vec<(Vec<f64>, f64)> = h.equalities().map(|(a, b)| (a.to_vec(), *b)).collect();
    let ineqs: Vec<(Vec<f64>, f64)> = h.inequalities().map(|(a, b)| (a.to_vec(), *b)).collect();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut pick = Vec::new();
    choose(&ineqs, 0, dim, &mut pick, &mut |sel: &[usize]| {
        let rows: Vec<&(Vec<f64>, f64)> = eqs.iter().chain(sel.iter().map(|&i| &ineqs[i])).collect();
        if rows.len() < dim {
            return;
        }
        let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let svd = a.clone().svd(true, true);
        if svd.rank(1e-10) < dim {
            return;
        }
        let Ok(x) = svd.solve(&b, 1e-12) else { return };
        if (&a * &x - &b).amax() > tol {
            return;
        }
        let feasible = ineqs.iter().all(|(r, rhs)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= rhs + tol);
        if !feasible {
            return;
        }
        let v: Vec<f64> = x.iter().copied().collect();
        if !out.iter().any(|w| w.iter().zip(&v).all(|(p, q)| (p - q).abs() <= tol)) {
            out.push(v);
        }
    });
    out
}

fn choose(items: &[(Vec<f64>, f64)], start: usize, left: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    // Every subset of at most `left` rows.
    f(pick);
    if left == 0 {
        return;
    }
    for i in start..items.len() {
        pick.push(i);
        choose(items, i + 1, left - 1, pick, f);
        pick.pop();
    }
}

pub fn same_point_sets(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    let close = |p: &Vec<f64>, q: &Vec<f64>| p.iter().zip(q).all(|(x, y)| (x - y).abs() <= tol);
    a.len() == b.len() && a.iter().all(|p| b.iter().any(|q| close(p, q))) && b.iter().all(|q| a.iter().any(|p| close(p, q)))
}

/// Bounded polytope: a box plus random cuts that keep a random interior point.
pub fn random_h_polytope(rng: &mut impl Rng, dim: usize) -> HPolyhedron<f64> {
    let mut h = HPolyhedron::new(dim);
    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
    for i in 0..dim {
        let mut row = vec![0.0; dim];
        row[i] = 1.0;
        h.push_ineq(row.clone(), rng.random_range(1.0..2.0));
        row[i] = -1.0;
        h.push_ineq(row, rng.random_range(1.0..2.0));
    }
    for _ in 0..rng.random_range(1..=2 * dim) {
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at_c: f64 = a.iter().zip(&center).map(|(p, q)| p * q).sum();
        h.push_ineq(a, at_c + rng.random_range(0.05..1.0));
    }
    h
}

/// Random uncertain model: `n ≤ n_max` proteins, `L ≤ l_max` extremal systems sharing one structure.
pub fn random_model(rng: &mut impl Rng, n_max: usize, l_max: usize) -> UncertainGrn {
    let n = rng.random_range(1..=n_max);
    let l = rng.random_range(1..=l_max);
    let thresholds: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let m = rng.random_range(1..=2);
            let mut t = 0.0;
            (0..m)
                .map(|_| {
                    t += rng.random_range(0.5..1.5);
                    t
                })
                .collect()
        })
        .collect();
    let degradation: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    // Structure: per target a list of terms, each term a list of (var, threshold, plus?).
    let structure: Vec<Vec<Vec<(usize, usize, bool)>>> = (0..n)
        .map(|_| {
            (0..rng.random_range(1..=2))
                .map(|_| {
                    let mut factors: Vec<(usize, usize, bool)> = Vec::new();
                    for _ in 0..rng.random_range(0..=2) {
                        let v = rng.random_range(0..n);
                        let t = rng.random_range(0..thresholds[v].len());
                        if factors.iter().all(|&(fv, ft, _)| (fv, ft) != (v, t)) {
                            factors.push((v, t, rng.random_bool(0.5)));
                        }
                    }
                    factors
                })
                .collect()
        })
        .collect();
    let systems: Vec<serde_json::Value> = (0..l)
        .map(|_| {
            let production: Vec<serde_json::Value> = structure
                .iter()
                .enumerate()
                .map(|(i, terms)| {
                    let top = thresholds[i].last().unwrap() * degradation[i];
                    let terms: Vec<serde_json::Value> = terms
                        .iter()
                        .map(|factors| {
                            json!({
                                "coeff": rng.random_range(0.0..1.6 * top),
                                "factors": factors
                                    .iter()
                                    .map(|&(v, t, plus)| json!({"var": v + 1, "threshold": t + 1, "sign": if plus { "plus" } else { "minus" }}))
                                    .collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    json!({"target": i + 1, "terms": terms})
                })
                .collect();
            json!({ "production": production })
        })
        .collect();
    let text = json!({
        "n": n,
        "degradation": degradation,
        "thresholds": thresholds,
        "extremal_systems": systems,
    })
    .to_string();
    UncertainGrn::from_json(&text).expect("generated model is valid")
}

pub fn random_point(rng: &mut impl Rng, model: &UncertainGrn) -> Vec<f64> {
    model
        .thresholds()
        .iter()
        .map(|t| rng.random_range(0.0..1.5 * t.last().copied().unwrap_or(1.0)))
        .collect()
}

/// `Σ_D' α_D' f^λ_{D'} − C x` built straight from the model.
pub fn filippov_velocity(
    model: &UncertainGrn,
    partition: &Partition,
    lambda: &LambdaInstance,
    alpha: &[(DomainId, f64)],
    x: &[f64],
) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().zip(model.degradation()).map(|(xi, c)| -c * xi).collect();
    for (d, a) in alpha {
        let f = model.instantiate(lambda, partition.domain(*d)).unwrap();
        for i in 0..v.len() {
            v[i] += a * f[i];
        }
    }
    v
}

/// `V̇ = (2Px + 2d)·(f − Cx)` for `V = xᵀPx + 2dᵀx + ω`.
pub fn lie_derivative(p: &DMatrix<f64>, d: &DVector<f64>, f: &DVector<f64>, c: &[f64], x: &DVector<f64>) -> f64 {
    let cx = DVector::from_iterator(x.len(), x.iter().zip(c).map(|(a, b)| a * b));
    (2.0 * p * x + 2.0 * d).dot(&(f - cx))
}

pub fn random_sym(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

pub fn random_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// A point strictly inside the simplex.
pub fn interior_lambda(rng: &mut impl Rng, l: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..l).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Checks the simulator invariants on one trajectory; `Err` names the first violation.
pub fn check_trajectory(
    model: &UncertainGrn,
    partition: &Partition,
    lambda: &LambdaInstance,
    traj: &grncert_core::filippov::Trajectory,
) -> Result<(), String> {
    use grncert_core::filippov::SegmentKind;
    use grncert_core::partition::Coord;
    use grncert_core::polytope::{sliding_polytope, sliding_rate_matrix};

    let c = model.degradation();
    for (k, seg) in traj.segments.iter().enumerate() {
        if !(seg.t1 >= seg.t0) {
            return Err(format!("segment {k}: time runs backwards"));
        }
        if let Some(next) = traj.segments.get(k + 1) {
            let gap = seg.x1.iter().zip(&next.x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if gap > 1e-9 || (seg.t1 - next.t0).abs() > 1e-12 {
                return Err(format!("segment {k}: discontinuity {gap:e}"));
            }
        }
        let samples: Vec<f64> = (0..=8).map(|s| seg.t0 + (seg.t1 - seg.t0) * s as f64 / 8.0).collect();
        for &t in &samples {
            let x = seg.state_at(t);
            if x.iter().any(|v| *v < -1e-12) {
                return Err(format!("segment {k}: negative state {x:?}"));
            }
            match seg.kind {
                SegmentKind::Regulatory => {
                    let f = model.instantiate(lambda, partition.domain(seg.domain)).unwrap();
                    let v = seg.velocity_at(t);
                    for i in 0..x.len() {
                        let phi = f[i] / c[i];
                        if (phi - x[i]).abs() > 1e-12 && v[i].signum() != (phi - x[i]).signum() {
                            return Err(format!("segment {k}: x_{i} moves away from its focal value"));
                        }
                    }
                }
                SegmentKind::Sliding => {
                    let d = partition.domain(seg.domain);
                    let v = filippov_velocity(model, partition, lambda, &seg.alpha, &x);
                    for &i in &seg.pinned {
                        let Coord::Pinned(th) = d.coords()[i] else { return Err("pinned var is free".into()) };
                        if (x[i] - partition.threshold(i, th)).abs() > 1e-9 {
                            return Err(format!("segment {k}: x_{i} left its threshold"));
                        }
                        if v[i].abs() > 1e-10 {
                            return Err(format!("segment {k}: pinned velocity {:e}", v[i]));
                        }
                    }
                    // Membership of γ = λ ⊗ α in the sliding polytope and F γ − C x = velocity.
                    let alpha: Vec<f64> = seg.alpha.iter().map(|(_, a)| *a).collect();
                    let gamma: Vec<f64> = lambda.weights().iter().flat_map(|l| alpha.iter().map(move |a| l * a)).collect();
                    let h = sliding_polytope::<f64>(model, partition, seg.domain).unwrap();
                    if !h.contains(&gamma, &1e-8).unwrap() {
                        return Err(format!("segment {k}: γ outside the sliding polytope"));
                    }
                    let f = sliding_rate_matrix(model, partition, seg.domain).unwrap();
                    for i in 0..x.len() {
                        let fg: f64 = f[i].iter().zip(&gamma).map(|(a, b)| a * b).sum();
                        if (fg - c[i] * x[i] - v[i]).abs() > 1e-8 {
                            return Err(format!("segment {k}: F γ − C x differs from the velocity"));
                        }
                    }
                    let sim = seg.velocity_at(t);
                    for i in (0..x.len()).filter(|i| !seg.pinned.contains(i)) {
                        if (sim[i] - v[i]).abs() > 1e-9 * (1.0 + v[i].abs()) {
                            return Err(format!("segment {k}: free velocity mismatch on x_{i}"));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Lawson–Hanson nonnegative least squares: `argmin ‖A w − b‖` over `w ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut w = DVector::zeros(n);
    let mut passive = vec![false; n];
    for _ in 0..(3 * n + 10) {
        let grad = a.transpose() * (b - a * &w);
        let Some((j, g)) = (0..n).filter(|&j| !passive[j]).map(|j| (j, grad[j])).max_by(|x, y| x.1.total_cmp(&y.1)) else {
            break;
        };
        if g <= 1e-12 {
            break;
        }
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let z = sub.clone().svd(true, true).solve(b, 1e-14).unwrap();
            if z.iter().all(|v| *v > 0.0) {
                for (c, &j) in idx.iter().enumerate() {
                    w[j] = z[c];
                }
                break;
            }
            let mut step = 1.0f64;
            for (c, &j) in idx.iter().enumerate() {
                if z[c] <= 0.0 {
                    step = step.min(w[j] / (w[j] - z[c]));
                }
            }
            for (c, &j) in idx.iter().enumerate() {
                w[j] += step * (z[c] - w[j]);
                if w[j] <= 1e-15 {
                    w[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    w
}

/// `y ∈ cone(columns)` up to `tol` in residual norm.
pub fn in_cone(columns: &[Vec<f64>], y: &[f64], tol: f64) -> bool {
    let a = DMatrix::from_fn(y.len(), columns.len(), |r, c| columns[c][r]);
    let b = DVector::from_column_slice(y);
    let w = nnls(&a, &b);
    (a * w - b).norm() <= tol
}
