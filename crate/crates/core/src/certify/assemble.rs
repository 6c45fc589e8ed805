//! SDP assembly for the common and extremal Lyapunov-function searches.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::model::UncertainGrn;
use crate::partition::{sink_domains, DomainId, Partition};
use crate::polytope::{homogenization_cone, sliding_polytope, sliding_rate_matrix, vertices};
use crate::sdp::{SdpProblem, Sense, VarId, VarKind};
use crate::stg::{check_assumption1, Stg};

use super::blocks::{build_delta_ptilde, build_l_matrix, build_ptilde, pbar};
use super::{CertifyConfig, CertifyError, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionVars {
    pub p: VarId,
    pub d: VarId,
    pub omega: VarId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ContinuityPair {
    pub domain: DomainId,
    pub other: DomainId,
    pub face: DomainId,
}

/// A sealed SDP together with the bookkeeping needed to read a certificate back.
#[derive(Debug, Clone)]
pub struct AssembledProblem {
    pub sdp: SdpProblem,
    pub mode: Mode,
    pub config: CertifyConfig,
    /// One map per function set: `1` for common mode, `L` for extremal mode.
    pub functions: Vec<BTreeMap<DomainId, FunctionVars>>,
    pub in_scope: Vec<DomainId>,
    pub sinks: BTreeSet<DomainId>,
    pub pairs: Vec<ContinuityPair>,
    pub labels: BTreeMap<DomainId, String>,
}

struct SlidingData {
    f: DMatrix<f64>,
    w: Vec<DVector<f64>>,
}

fn sliding_data(model: &UncertainGrn, partition: &Partition, tol: f64) -> Result<BTreeMap<DomainId, SlidingData>, CertifyError> {
    let mut out = BTreeMap::new();
    for s in partition.switching() {
        let h = sliding_polytope::<f64>(model, partition, s.id())?;
        let w = vertices(&h, &tol)?;
        let rows = sliding_rate_matrix(model, partition, s.id())?;
        let cols = rows.first().map_or(0, Vec::len);
        let f = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
        out.insert(
            s.id(),
            SlidingData {
                f,
                w: w.into_iter().map(DVector::from_vec).collect(),
            },
        );
    }
    Ok(out)
}

/// Pairs `(D, D', G)` of in-scope neighbours of a face `G` that either carries an
/// STG edge or has a nonempty sliding polytope. Each pair is chained to the first
/// in-scope neighbour of `G`.
pub fn continuity_pairs(
    model: &UncertainGrn,
    partition: &Partition,
    stgs: &[Stg],
    in_scope: &BTreeSet<DomainId>,
    tol: f64,
) -> Result<Vec<ContinuityPair>, CertifyError> {
    let mut out = Vec::new();
    for g in partition.switching() {
        let touched = stgs
            .iter()
            .any(|s| s.edges.iter().any(|e| e.from == g.id() || e.to == g.id()));
        let sliding = if touched {
            true
        } else {
            let h = sliding_polytope::<f64>(model, partition, g.id())?;
            !vertices(&h, &tol)?.is_empty()
        };
        if !(touched || sliding) {
            continue;
        }
        let adj: Vec<DomainId> = partition
            .adjacent_regulatory(g.id())?
            .into_iter()
            .filter(|d| in_scope.contains(d))
            .collect();
        for &other in adj.iter().skip(1) {
            out.push(ContinuityPair {
                domain: adj[0],
                other,
                face: g.id(),
            });
        }
    }
    Ok(out)
}

/// Orthonormal basis of the column span of `gamma`.
fn span_basis(gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = gamma.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax.max(1e-300))
        .collect();
    DMatrix::from_fn(gamma.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

fn congruence(gamma: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    gamma.transpose() * x * gamma
}

fn cone_of(partition: &Partition, id: DomainId, tol: f64) -> Result<DMatrix<f64>, CertifyError> {
    Ok(homogenization_cone(&partition.closure::<f64>(id), &tol)?.to_matrix())
}

/// `diag(I_n, 0)`.
fn state_part(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n + 1, n + 1);
    m[(n, n)] = 0.0;
    m
}

pub fn assemble_common(model: &UncertainGrn, config: &CertifyConfig) -> Result<AssembledProblem, CertifyError> {
    assemble(model, config, Mode::Common)
}

pub fn assemble_extremal(model: &UncertainGrn, config: &CertifyConfig) -> Result<AssembledProblem, CertifyError> {
    assemble(model, config, Mode::Extremal)
}

/// One routine for both modes: in common mode a single function set serves every
/// extremal system, in extremal mode set `k` belongs to system `k`. Names are chosen so
/// that an `L = 1` model produces the same problem in both modes.
pub fn assemble(model: &UncertainGrn, config: &CertifyConfig, mode: Mode) -> Result<AssembledProblem, CertifyError> {
    if !(config.margin >= 0.0) {
        return Err(CertifyError::Config("margin must be nonnegative".into()));
    }
    let partition = Partition::new(model);
    let report = check_assumption1(model, &partition)?;
    if !report.passed {
        return Err(CertifyError::Assumption(
            report
                .differing
                .iter()
                .map(|d| {
                    format!(
                        "{} -> {} present in {:?}",
                        partition.label(d.edge.from),
                        partition.label(d.edge.to),
                        d.present_in
                    )
                })
                .collect(),
        ));
    }
    let sinks = sink_domains(model, &partition)?;
    let in_scope: Vec<DomainId> = partition
        .regulatory()
        .map(|d| d.id())
        .filter(|d| !(config.drop_sinks && sinks.contains(d)))
        .collect();
    let scope: BTreeSet<DomainId> = in_scope.iter().copied().collect();
    let n = model.n();
    let l = model.extremal_count();
    let sets = match mode {
        Mode::Common => 1,
        Mode::Extremal => l,
    };
    let c = model.degradation().to_vec();
    let tol = config.polytope_tol;
    let labels: BTreeMap<DomainId, String> = partition.domains().iter().map(|d| (d.id(), partition.label(d.id()))).collect();
    let lab = |id: DomainId| labels[&id].clone();

    let mut sdp = SdpProblem::new();
    let mut functions = Vec::with_capacity(sets);
    for s in 0..sets {
        let mut map = BTreeMap::new();
        for &d in &in_scope {
            let name = format!("V{}", s + 1);
            let p = sdp.declare(format!("{name}.P[{}]", lab(d)), VarKind::SymMatrix(n), false);
            let dv = sdp.declare(format!("{name}.d[{}]", lab(d)), VarKind::Vector(n), false);
            let omega = sdp.declare(format!("{name}.omega[{}]", lab(d)), VarKind::Scalar, false);
            map.insert(d, FunctionVars { p, d: dv, omega });
        }
        functions.push(map);
    }

    let gammas: BTreeMap<DomainId, DMatrix<f64>> = in_scope
        .iter()
        .map(|&d| Ok((d, cone_of(&partition, d, tol)?)))
        .collect::<Result<_, CertifyError>>()?;
    let rates: BTreeMap<(DomainId, usize), DVector<f64>> = in_scope
        .iter()
        .flat_map(|&d| (0..l).map(move |k| (d, k)))
        .map(|(d, k)| Ok(((d, k), DVector::from_vec(model.rate_in_domain(k, partition.domain(d))?))))
        .collect::<Result<_, CertifyError>>()?;
    let strict = state_part(n) * config.strict_decrease;

    // (a) Regulatory decrease.
    for &d in &in_scope {
        let gamma = &gammas[&d];
        let r = gamma.ncols();
        for s in 0..sets {
            let ks: Vec<usize> = match mode {
                Mode::Common => (0..l).collect(),
                Mode::Extremal => vec![s],
            };
            let fv = functions[s][&d];
            for k in ks {
                let tag = format!("dec[{}][V{}][k={}]", lab(d), s + 1, k + 1);
                let m = sdp.declare(format!("M.{tag}"), VarKind::SymMatrix(r), true);
                let f = &rates[&(d, k)];
                let e = sdp.linearize(&[fv.p, fv.d, m], |x| {
                    let pt = build_ptilde(&sdp.sym_value(x, fv.p), &sdp.vector_value(x, fv.d), f, &c).expect("dimensions");
                    congruence(gamma, &(pt + &strict)) + sdp.sym_value(x, m)
                });
                sdp.add_lmi(tag, e, Sense::Nsd);
            }
        }
    }

    // (b) Sliding decrease on switching domains with a nonempty sliding polytope.
    let slide = sliding_data(model, &partition, tol)?;
    for (&g, data) in &slide {
        if data.w.is_empty() {
            continue;
        }
        let adj = partition.adjacent_regulatory(g)?;
        if adj.iter().any(|a| !scope.contains(a)) {
            continue;
        }
        let rep = adj[0];
        let gamma = cone_of(&partition, g, tol)?;
        let r = gamma.ncols();
        for (j, w) in data.w.iter().enumerate() {
            for s in 0..sets {
                let fv = functions[s][&rep];
                let tag = format!("sw[{}][j={}][V{}]", lab(g), j + 1, s + 1);
                let m = sdp.declare(format!("M.{tag}"), VarKind::SymMatrix(r), true);
                let e = sdp.linearize(&[fv.p, fv.d, m], |x| {
                    let lm = build_l_matrix(&sdp.sym_value(x, fv.p), &sdp.vector_value(x, fv.d), &data.f, w, &c)
                        .expect("dimensions");
                    congruence(&gamma, &(lm + &strict)) + sdp.sym_value(x, m)
                });
                sdp.add_lmi(tag, e, Sense::Nsd);
            }
        }
    }

    // (c) Continuity: Bᵀ (P̄_D − P̄_D') B = 0 on the span of each face cone.
    let stgs = report.graphs;
    let pairs = continuity_pairs(model, &partition, &stgs, &scope, tol)?;
    for pair in &pairs {
        let basis = span_basis(&cone_of(&partition, pair.face, tol)?);
        let q = basis.ncols();
        for s in 0..sets {
            let a = functions[s][&pair.domain];
            let b = functions[s][&pair.other];
            let vars = [a.p, a.d, a.omega, b.p, b.d, b.omega];
            let expr = sdp.linearize(&vars, |x| {
                let pa = pbar(&sdp.sym_value(x, a.p), &sdp.vector_value(x, a.d), sdp.scalar_value(x, a.omega));
                let pb = pbar(&sdp.sym_value(x, b.p), &sdp.vector_value(x, b.d), sdp.scalar_value(x, b.omega));
                basis.transpose() * (pa - pb) * &basis
            });
            for i in 0..q {
                for jj in i..q {
                    let coeffs: Vec<(usize, f64)> = expr
                        .terms
                        .iter()
                        .map(|(u, m)| (*u, m[(i, jj)]))
                        .filter(|(_, v)| v.abs() > 1e-14)
                        .collect();
                    if coeffs.is_empty() {
                        continue;
                    }
                    let id = format!(
                        "cont[{}|{}][{}][V{}][{},{}]",
                        lab(pair.domain),
                        lab(pair.other),
                        lab(pair.face),
                        s + 1,
                        i + 1,
                        jj + 1
                    );
                    sdp.add_equality(id, coeffs, -expr.constant[(i, jj)]);
                }
            }
        }
    }

    // (d) Cross constraints between extremal functions; identically zero when δf = 0.
    if mode == Mode::Extremal {
        for &d in &in_scope {
            let gamma = &gammas[&d];
            let r = gamma.ncols();
            for k in 0..l {
                for j in (k + 1)..l {
                    let (fk, fj) = (&rates[&(d, k)], &rates[&(d, j)]);
                    if fk == fj {
                        continue;
                    }
                    let (vk, vj) = (functions[k][&d], functions[j][&d]);
                    let tag = format!("cross[{}][k={},j={}]", lab(d), k + 1, j + 1);
                    let m = sdp.declare(format!("M.{tag}"), VarKind::SymMatrix(r), true);
                    let e = sdp.linearize(&[vk.p, vk.d, vj.p, vj.d, m], |x| {
                        let dp = build_delta_ptilde(
                            &sdp.sym_value(x, vk.p),
                            &sdp.sym_value(x, vj.p),
                            &sdp.vector_value(x, vk.d),
                            &sdp.vector_value(x, vj.d),
                            fk,
                            fj,
                        )
                        .expect("dimensions");
                        congruence(gamma, &dp) + sdp.sym_value(x, m)
                    });
                    sdp.add_lmi(tag, e, Sense::Nsd);
                }
            }
        }
    }

    // (e) Positivity normalization V_D(x) ≥ ε‖x‖² on the domain cone.
    if config.include_positivity {
        let eps = state_part(n) * config.margin;
        for &d in &in_scope {
            let gamma = &gammas[&d];
            let r = gamma.ncols();
            for s in 0..sets {
                let fv = functions[s][&d];
                let tag = format!("pos[{}][V{}]", lab(d), s + 1);
                let nv = sdp.declare(format!("N.{tag}"), VarKind::SymMatrix(r), true);
                let e = sdp.linearize(&[fv.p, fv.d, fv.omega, nv], |x| {
                    let pb = pbar(&sdp.sym_value(x, fv.p), &sdp.vector_value(x, fv.d), sdp.scalar_value(x, fv.omega));
                    congruence(gamma, &(pb - &eps)) - sdp.sym_value(x, nv)
                });
                sdp.add_lmi(tag, e, Sense::Psd);
            }
        }
    }

    Ok(AssembledProblem {
        sdp,
        mode,
        config: config.clone(),
        functions,
        in_scope,
        sinks,
        pairs,
        labels,
    })
}

/// Maps a common-mode solution onto an extremal-mode problem of the same model:
/// every function set copies the common one, cross slacks are zero.
pub fn lift_common_solution(common: &AssembledProblem, extremal: &AssembledProblem, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; extremal.sdp.n_scalars()];
    for decl in extremal.sdp.vars() {
        let name = common_name(&decl.name);
        let Some(src) = common.sdp.find_var(&name) else { continue };
        let src = common.sdp.var(src);
        let count = decl.kind.scalar_count();
        out[decl.offset..decl.offset + count].copy_from_slice(&values[src.offset..src.offset + count]);
    }
    out
}

/// `V{k}` in an extremal name becomes `V1`; the system tag `k=` is left unchanged.
fn common_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let bytes = name.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let at_word = i == 0 || matches!(bytes[i - 1], b'[' | b'.');
        if bytes[i] == b'V' && at_word && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            out.push_str("V1");
            i = j;
        } else {
            out.push(bytes[i] as char);
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn common_names() {
        assert_eq!(common_name("V3.P[D1]"), "V1.P[D1]");
        assert_eq!(common_name("M.dec[D4][V2][k=2]"), "M.dec[D4][V1][k=2]");
        assert_eq!(common_name("M.sw[x1:(0,1) x2=1][j=12][V4]"), "M.sw[x1:(0,1) x2=1][j=12][V1]");
        assert_eq!(common_name("M.cross[D1][k=1,j=2]"), "M.cross[D1][k=1,j=2]");
    }
}
