//! Robust piecewise-quadratic Lyapunov certificates.
//!
//! A certificate assigns `V_D(x) = xᵀ P x + 2 dᵀ x + ω` to every in-scope
//! regulatory domain, either once for all extremal systems (common mode)
//! or once per extremal system (extremal mode). In extremal mode the cross
//! constraints make `V̂^λ = Σ λ_k V^k` decrease along `σ^λ` for every `λ`.

mod assemble;
mod blocks;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{LambdaInstance, ModelError, UncertainGrn};
use crate::partition::{DomainId, PartitionError};
use crate::polytope::PolytopeError;
use crate::sdp::{residuals, solve, ResidualReport, SdpSolution, SolveStatus, SolverSettings};

pub use assemble::{
    assemble, assemble_common, assemble_extremal, continuity_pairs, lift_common_solution, AssembledProblem,
    ContinuityPair, FunctionVars,
};
pub use blocks::{build_delta_ptilde, build_l_matrix, build_ptilde, pbar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("assumption violated: state transition graphs differ: {}", .0.join("; "))]
    Assumption(Vec<String>),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver did not report feasibility: {0:?}")]
    NotFeasible(SolveStatus),
    #[error("residual {value:e} of constraint {id} exceeds tolerance")]
    ResidualTooLarge { id: String, value: f64 },
    #[error("operation requires a certificate in {expected:?} mode")]
    ModeMismatch { expected: Mode },
    #[error("matrix P of domain {0} is not symmetric")]
    Asymmetric(String),
    #[error("malformed certificate: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Common,
    Extremal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    /// `ε` in the positivity normalization.
    pub margin: f64,
    pub drop_sinks: bool,
    pub include_positivity: bool,
    /// Optional `δ` for strict decrease `V̇ ≤ −δ‖x‖²`; zero keeps decrease non-strict.
    pub strict_decrease: f64,
    /// Largest accepted recomputed residual.
    pub tolerance: f64,
    pub polytope_tol: f64,
    pub solver: SolverSettings,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            margin: 1e-3,
            drop_sinks: true,
            include_positivity: true,
            strict_decrease: 0.0,
            tolerance: 1e-7,
            polytope_tol: 1e-9,
            solver: SolverSettings::default(),
        }
    }
}

/// One quadratic piece `xᵀ P x + 2 dᵀ x + ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadPiece {
    pub p: DMatrix<f64>,
    pub d: DVector<f64>,
    pub omega: f64,
}

impl QuadPiece {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        (x.transpose() * &self.p * &x)[(0, 0)] + 2.0 * self.d.dot(&x) + self.omega
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PwqFunction {
    pub pieces: BTreeMap<DomainId, QuadPiece>,
}

impl PwqFunction {
    pub fn eval(&self, domain: DomainId, x: &[f64]) -> Option<f64> {
        self.pieces.get(&domain).map(|q| q.eval(x))
    }

    /// `Σ w_k F_k` piecewise; every function must cover the same domains.
    pub fn weighted_sum(functions: &[PwqFunction], weights: &[f64]) -> PwqFunction {
        let mut pieces = BTreeMap::new();
        for (&id, first) in &functions[0].pieces {
            let n = first.d.len();
            let mut acc = QuadPiece {
                p: DMatrix::zeros(n, n),
                d: DVector::zeros(n),
                omega: 0.0,
            };
            for (f, &w) in functions.iter().zip(weights) {
                let q = &f.pieces[&id];
                acc.p += &q.p * w;
                acc.d += &q.d * w;
                acc.omega += q.omega * w;
            }
            pieces.insert(id, acc);
        }
        PwqFunction { pieces }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub max_block: f64,
    pub max_equality: f64,
    pub nonneg_violation: f64,
    pub worst_constraint: String,
    pub worst_value: f64,
    pub block_count: usize,
    pub equality_count: usize,
}

impl ResidualSummary {
    fn from_report(r: &ResidualReport) -> Self {
        let (worst_constraint, worst_value) = r.worst();
        Self {
            max_block: if r.blocks.is_empty() { 0.0 } else { r.max_block() },
            max_equality: r.max_equality,
            nonneg_violation: r.nonneg_violation,
            worst_constraint,
            worst_value,
            block_count: r.blocks.len(),
            equality_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub mode: Mode,
    pub functions: Vec<PwqFunction>,
    pub excluded_sinks: Vec<DomainId>,
    pub labels: BTreeMap<DomainId, String>,
    pub residuals: ResidualSummary,
    pub config: CertifyConfig,
    pub t_star: f64,
    pub model_hash: Option<String>,
}

impl Certificate {
    pub fn nothing_to_certify(&self) -> bool {
        self.functions.iter().all(|f| f.pieces.is_empty())
    }

    pub fn domains(&self) -> BTreeSet<DomainId> {
        self.functions.first().map(|f| f.pieces.keys().copied().collect()).unwrap_or_default()
    }

    /// `V̂^λ` for extremal certificates.
    pub fn combine(&self, lambda: &LambdaInstance) -> Result<PwqFunction, CertifyError> {
        combine(self, lambda)
    }

    /// The function to evaluate along `σ^λ`: `V̂^λ` in extremal mode, `V` in common mode.
    pub fn function_for(&self, lambda: &LambdaInstance) -> Result<PwqFunction, CertifyError> {
        match self.mode {
            Mode::Common => Ok(self.functions[0].clone()),
            Mode::Extremal => combine(self, lambda),
        }
    }

    pub fn to_json(&self) -> Value {
        let functions: Vec<Value> = self
            .functions
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let pieces: Vec<Value> = f
                    .pieces
                    .iter()
                    .map(|(id, q)| {
                        let n = q.d.len();
                        json!({
                            "domain_id": id.0,
                            "label": self.labels.get(id),
                            "P": (0..n).map(|i| (0..n).map(|j| q.p[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
                            "d": q.d.iter().copied().collect::<Vec<_>>(),
                            "omega": q.omega,
                        })
                    })
                    .collect();
                json!({"index": k + 1, "pieces": pieces})
            })
            .collect();
        json!({
            "mode": self.mode,
            "model_sha256": self.model_hash,
            "functions": functions,
            "excluded_sinks": self.excluded_sinks.iter().map(|d| json!({"domain_id": d.0, "label": self.labels.get(d)})).collect::<Vec<_>>(),
            "nothing_to_certify": self.nothing_to_certify(),
            "t_star": self.t_star,
            "residuals": serde_json::to_value(&self.residuals).expect("residual summary"),
            "config": {
                "margin": self.config.margin,
                "drop_sinks": self.config.drop_sinks,
                "include_positivity": self.config.include_positivity,
                "strict_decrease": self.config.strict_decrease,
                "tolerance": self.config.tolerance,
                "polytope_tol": self.config.polytope_tol,
                "margin_accept": self.config.solver.margin_accept,
                "box_radius": self.config.solver.box_radius,
            },
        })
    }

    /// Reads the functions back from [`Certificate::to_json`] output and validates symmetry.
    pub fn from_json(v: &Value) -> Result<Self, CertifyError> {
        let err = |m: &str| CertifyError::Format(m.to_string());
        let mode = match v["mode"].as_str() {
            Some("common") => Mode::Common,
            Some("extremal") => Mode::Extremal,
            _ => return Err(err("mode")),
        };
        let num = |x: &Value, what: &str| x.as_f64().ok_or_else(|| err(what));
        let mut labels = BTreeMap::new();
        let mut functions = Vec::new();
        for f in v["functions"].as_array().ok_or_else(|| err("functions"))? {
            let mut pieces = BTreeMap::new();
            for piece in f["pieces"].as_array().ok_or_else(|| err("pieces"))? {
                let id = DomainId(piece["domain_id"].as_u64().ok_or_else(|| err("domain_id"))? as usize);
                let label = piece["label"].as_str().unwrap_or_default().to_string();
                let rows = piece["P"].as_array().ok_or_else(|| err("P"))?;
                let n = rows.len();
                let mut p = DMatrix::zeros(n, n);
                for (i, row) in rows.iter().enumerate() {
                    let row = row.as_array().ok_or_else(|| err("P row"))?;
                    if row.len() != n {
                        return Err(err("P is not square"));
                    }
                    for (j, x) in row.iter().enumerate() {
                        p[(i, j)] = num(x, "P entry")?;
                    }
                }
                if (&p - p.transpose()).abs().max() > 1e-12 {
                    return Err(CertifyError::Asymmetric(label));
                }
                let d: Vec<f64> = piece["d"]
                    .as_array()
                    .ok_or_else(|| err("d"))?
                    .iter()
                    .map(|x| num(x, "d entry"))
                    .collect::<Result<_, _>>()?;
                if d.len() != n {
                    return Err(err("d length"));
                }
                let omega = num(&piece["omega"], "omega")?;
                labels.insert(id, label);
                pieces.insert(
                    id,
                    QuadPiece {
                        p,
                        d: DVector::from_vec(d),
                        omega,
                    },
                );
            }
            functions.push(PwqFunction { pieces });
        }
        let mut excluded_sinks = Vec::new();
        for s in v["excluded_sinks"].as_array().ok_or_else(|| err("excluded_sinks"))? {
            let id = DomainId(s["domain_id"].as_u64().ok_or_else(|| err("sink id"))? as usize);
            if let Some(l) = s["label"].as_str() {
                labels.insert(id, l.to_string());
            }
            excluded_sinks.push(id);
        }
        let r = &v["residuals"];
        let residuals = ResidualSummary {
            max_block: r["max_block"].as_f64().unwrap_or(f64::NAN),
            max_equality: r["max_equality"].as_f64().unwrap_or(f64::NAN),
            nonneg_violation: r["nonneg_violation"].as_f64().unwrap_or(f64::NAN),
            worst_constraint: r["worst_constraint"].as_str().unwrap_or_default().to_string(),
            worst_value: r["worst_value"].as_f64().unwrap_or(f64::NAN),
            block_count: r["block_count"].as_u64().unwrap_or(0) as usize,
            equality_count: r["equality_count"].as_u64().unwrap_or(0) as usize,
        };
        let c = &v["config"];
        let defaults = CertifyConfig::default();
        let config = CertifyConfig {
            margin: c["margin"].as_f64().unwrap_or(defaults.margin),
            drop_sinks: c["drop_sinks"].as_bool().unwrap_or(defaults.drop_sinks),
            include_positivity: c["include_positivity"].as_bool().unwrap_or(defaults.include_positivity),
            strict_decrease: c["strict_decrease"].as_f64().unwrap_or(0.0),
            tolerance: c["tolerance"].as_f64().unwrap_or(defaults.tolerance),
            polytope_tol: c["polytope_tol"].as_f64().unwrap_or(defaults.polytope_tol),
            solver: defaults.solver,
        };
        Ok(Self {
            mode,
            functions,
            excluded_sinks,
            labels,
            residuals,
            config,
            t_star: v["t_star"].as_f64().unwrap_or(f64::NAN),
            model_hash: v["model_sha256"].as_str().map(str::to_string),
        })
    }
}

/// Reads the Lyapunov pieces out of a solution after an independent residual check.
pub fn extract_certificate(problem: &AssembledProblem, solution: &SdpSolution) -> Result<Certificate, CertifyError> {
    if solution.status != SolveStatus::Feasible {
        return Err(CertifyError::NotFeasible(solution.status));
    }
    extract_values(problem, &solution.values, solution.t_star)
}

/// [`extract_certificate`] on raw values, without consulting a solver status.
pub fn extract_values(problem: &AssembledProblem, values: &[f64], t_star: f64) -> Result<Certificate, CertifyError> {
    if values.len() != problem.sdp.n_scalars() {
        return Err(CertifyError::Dimension {
            what: "solution".into(),
            expected: problem.sdp.n_scalars(),
            got: values.len(),
        });
    }
    let report = residuals(&problem.sdp, values);
    let (id, worst) = report.worst();
    if worst > problem.config.tolerance || worst.is_nan() {
        return Err(CertifyError::ResidualTooLarge { id, value: worst });
    }
    let mut summary = ResidualSummary::from_report(&report);
    summary.equality_count = problem.sdp.equalities().len();
    let functions = problem
        .functions
        .iter()
        .map(|set| PwqFunction {
            pieces: set
                .iter()
                .map(|(&id, fv)| {
                    (
                        id,
                        QuadPiece {
                            p: problem.sdp.sym_value(values, fv.p),
                            d: problem.sdp.vector_value(values, fv.d),
                            omega: problem.sdp.scalar_value(values, fv.omega),
                        },
                    )
                })
                .collect(),
        })
        .collect();
    let excluded_sinks = if problem.config.drop_sinks {
        problem.sinks.iter().copied().collect()
    } else {
        Vec::new()
    };
    Ok(Certificate {
        mode: problem.mode,
        functions,
        excluded_sinks,
        labels: problem.labels.clone(),
        residuals: summary,
        config: problem.config.clone(),
        t_star,
        model_hash: None,
    })
}

/// `V̂^λ = Σ λ_k V^k`.
pub fn combine(cert: &Certificate, lambda: &LambdaInstance) -> Result<PwqFunction, CertifyError> {
    if cert.mode != Mode::Extremal {
        return Err(CertifyError::ModeMismatch { expected: Mode::Extremal });
    }
    if lambda.len() != cert.functions.len() {
        return Err(CertifyError::Dimension {
            what: "lambda".into(),
            expected: cert.functions.len(),
            got: lambda.len(),
        });
    }
    if let Some(k) = lambda.vertex_index() {
        return Ok(cert.functions[k].clone());
    }
    Ok(PwqFunction::weighted_sum(&cert.functions, lambda.weights()))
}

/// Result of [`certify`]: the problem, the raw solve, and the checked certificate if any.
#[derive(Debug, Clone)]
pub struct CertifyOutcome {
    pub problem: AssembledProblem,
    pub solution: SdpSolution,
    pub certificate: Result<Certificate, CertifyError>,
}

/// Assemble, solve and extract.
pub fn certify(model: &UncertainGrn, config: &CertifyConfig, mode: Mode) -> Result<CertifyOutcome, CertifyError> {
    let problem = assemble(model, config, mode)?;
    let solution = solve(&problem.sdp, &config.solver);
    let certificate = extract_certificate(&problem, &solution).map(|mut c| {
        c.model_hash = Some(model.hash());
        c
    });
    Ok(CertifyOutcome {
        problem,
        solution,
        certificate,
    })
}
