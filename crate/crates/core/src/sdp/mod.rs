//! LMI feasibility problems and their solution.

mod jacobi;
mod problem;
mod solver;

use serde::Serialize;

pub use jacobi::symmetric_eigenvalues;
pub use problem::{AffineSym, LinearEquality, LmiBlock, SdpProblem, Sense, VarDecl, VarId, VarKind};
pub use solver::{solve, SdpSolution, SolveStatus, SolverSettings};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockResidual {
    pub id: String,
    /// `λ_max(E)` for `⪯ 0` blocks, `−λ_min(E)` for `⪰ 0` blocks; positive means violated.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub blocks: Vec<BlockResidual>,
    pub max_equality: f64,
    pub worst_equality: Option<String>,
    /// Most negative entry among nonnegative unknowns, reported as a positive violation.
    pub nonneg_violation: f64,
}

impl ResidualReport {
    /// Worst violation over blocks, equalities and sign constraints, with its constraint id.
    pub fn worst(&self) -> (String, f64) {
        let mut worst = ("none".to_string(), f64::NEG_INFINITY);
        for b in &self.blocks {
            if b.violation > worst.1 {
                worst = (b.id.clone(), b.violation);
            }
        }
        if self.max_equality > worst.1 {
            worst = (self.worst_equality.clone().unwrap_or_default(), self.max_equality);
        }
        if self.nonneg_violation > worst.1 {
            worst = ("nonnegativity".into(), self.nonneg_violation);
        }
        worst
    }

    pub fn max_block(&self) -> f64 {
        self.blocks.iter().map(|b| b.violation).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Recomputes every constraint at `values` with the standalone Jacobi eigensolver.
pub fn residuals(p: &SdpProblem, values: &[f64]) -> ResidualReport {
    let blocks = p
        .blocks()
        .iter()
        .map(|b| {
            let e = b.expr.eval(values);
            let n = e.nrows();
            let rows: Vec<f64> = (0..n * n).map(|k| e[(k / n, k % n)]).collect();
            let ev = symmetric_eigenvalues(&rows, n);
            let violation = match b.sense {
                Sense::Nsd => ev.last().copied().unwrap_or(0.0),
                Sense::Psd => -ev.first().copied().unwrap_or(0.0),
            };
            BlockResidual {
                id: b.id.clone(),
                violation,
            }
        })
        .collect();
    let mut max_equality = 0.0;
    let mut worst_equality = None;
    for e in p.equalities() {
        let r = (e.coeffs.iter().map(|&(u, c)| c * values[u]).sum::<f64>() - e.rhs).abs();
        if r >= max_equality {
            max_equality = r;
            worst_equality = Some(e.id.clone());
        }
    }
    let nonneg_violation = p
        .nonneg_indices()
        .iter()
        .map(|&u| -values[u])
        .fold(0.0, f64::max);
    ResidualReport {
        blocks,
        max_equality,
        worst_equality,
        nonneg_violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn problem() -> (SdpProblem, VarId) {
        let mut p = SdpProblem::new();
        let m = p.declare("P", VarKind::SymMatrix(2), false);
        let e = p.linearize(&[m], |x| p.sym_value(x, m));
        p.add_lmi("P<=0", e, Sense::Nsd);
        (p, m)
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let (p, _) = problem();
        let r = residuals(&p, &[0.0; 3]);
        assert_eq!(r.max_block(), 0.0);
        assert_eq!(r.nonneg_violation, 0.0);
    }

    #[test]
    fn perturbation_is_detected() {
        let (p, m) = problem();
        let mut x = vec![0.0; 3];
        x[p.var(m).sym_index(1, 1)] = 1e-6;
        let r = residuals(&p, &x);
        assert!((r.max_block() - 1e-6).abs() < 1e-15);
        assert_eq!(r.worst().0, "P<=0");
    }

    #[test]
    fn block_scaling_keeps_verdict() {
        for scale in [1.0, 10.0] {
            let mut p = SdpProblem::new();
            let v = p.declare("x", VarKind::Scalar, false);
            let a = p.linearize(&[v], |x| DMatrix::from_element(1, 1, scale * p.scalar_value(x, v)));
            let b = p.linearize(&[v], |x| DMatrix::from_element(1, 1, scale * (1.0 - p.scalar_value(x, v))));
            p.add_lmi("a", a, Sense::Nsd);
            p.add_lmi("b", b, Sense::Nsd);
            assert_eq!(solve(&p, &SolverSettings::default()).status, SolveStatus::Infeasible);
            let mut q = SdpProblem::new();
            let v = q.declare("x", VarKind::Scalar, false);
            let a = q.linearize(&[v], |x| DMatrix::from_element(1, 1, scale * (q.scalar_value(x, v) + 1.0)));
            q.add_lmi("a", a, Sense::Nsd);
            assert_eq!(solve(&q, &SolverSettings::default()).status, SolveStatus::Feasible);
        }
    }
}
