//! Uncertain piecewise-affine gene regulatory network models.
//!
//! A model holds `n` proteins with degradation rates `c_i`, per-protein
//! threshold lists, and `L` extremal production-rate functions. Each
//! rate function is a flat sum of products of step functions, so within
//! a regulatory domain it evaluates to a constant vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{Coord, Domain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("semantic error at {path}: {message}")]
    Semantic { path: String, message: String },
    #[error("rate undefined on switching domain")]
    SwitchingDomain,
    #[error("extremal index {index} out of range 1..={count}")]
    ExtremalIndex { index: usize, count: usize },
    #[error("lambda is not in the standard simplex: {0}")]
    Simplex(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

fn semantic(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Semantic {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSign {
    Plus,
    Minus,
}

/// `s^±(x_var, θ_{var,threshold})`, indices 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepFactor {
    pub var: usize,
    pub threshold: usize,
    pub sign: StepSign,
}

impl StepFactor {
    /// Value of the step function on a regulatory coordinate interval.
    fn eval(&self, coord: Coord) -> Option<f64> {
        match coord {
            Coord::Interval(j) => {
                let above = j > self.threshold;
                Some(match (self.sign, above) {
                    (StepSign::Plus, true) | (StepSign::Minus, false) => 1.0,
                    _ => 0.0,
                })
            }
            Coord::Pinned(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductTerm {
    pub coeff: f64,
    pub factors: Vec<StepFactor>,
}

/// Production rates `f(x)`: one list of product terms per protein.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    pub terms: Vec<Vec<ProductTerm>>,
}

impl RateFunction {
    pub fn eval(&self, domain: &Domain) -> Result<Vec<f64>, ModelError> {
        if !domain.is_regulatory() {
            return Err(ModelError::SwitchingDomain);
        }
        let coords = domain.coords();
        Ok(self
            .terms
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|t| {
                        t.factors
                            .iter()
                            .map(|f| f.eval(coords[f.var]).unwrap_or(0.0))
                            .product::<f64>()
                            * t.coeff
                    })
                    .sum()
            })
            .collect())
    }
}

/// The family of systems `ẋ = Σ λ_k f^k(x) − C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainGrn {
    n: usize,
    degradation: Vec<f64>,
    thresholds: Vec<Vec<f64>>,
    bounds: Vec<Option<f64>>,
    extremal: Vec<RateFunction>,
}

impl UncertainGrn {
    /// Validates and builds a model. Indices inside `extremal` are 0-based.
    pub fn new(
        degradation: Vec<f64>,
        thresholds: Vec<Vec<f64>>,
        bounds: Vec<Option<f64>>,
        extremal: Vec<RateFunction>,
    ) -> Result<Self, ModelError> {
        let n = degradation.len();
        if n == 0 {
            return Err(semantic("n", "at least one protein is required"));
        }
        if thresholds.len() != n {
            return Err(semantic("thresholds", format!("expected {n} lists")));
        }
        if bounds.len() != n {
            return Err(semantic("bounds", format!("expected {n} entries")));
        }
        for (i, c) in degradation.iter().enumerate() {
            if !(c.is_finite() && *c > 0.0) {
                return Err(semantic(
                    format!("degradation[{}]", i + 1),
                    "degradation rates must be strictly positive",
                ));
            }
        }
        for (i, th) in thresholds.iter().enumerate() {
            for (j, t) in th.iter().enumerate() {
                if !(t.is_finite() && *t > 0.0) {
                    return Err(semantic(
                        format!("thresholds[{}][{}]", i + 1, j + 1),
                        "thresholds must be positive",
                    ));
                }
                if j > 0 && *t <= th[j - 1] {
                    return Err(semantic(
                        format!("thresholds[{}][{}]", i + 1, j + 1),
                        "thresholds must be strictly increasing",
                    ));
                }
            }
        }
        for (i, b) in bounds.iter().enumerate() {
            if let Some(b) = b {
                let last = thresholds[i].last().copied().unwrap_or(0.0);
                if !(b.is_finite() && *b > last) {
                    return Err(semantic(
                        format!("bounds[{}]", i + 1),
                        "bound must exceed the largest threshold",
                    ));
                }
            }
        }
        if extremal.is_empty() {
            return Err(semantic("extremal_systems", "at least one extremal system is required"));
        }
        for (k, rate) in extremal.iter().enumerate() {
            if rate.terms.len() != n {
                return Err(semantic(
                    format!("extremal_systems[{}].production", k + 1),
                    format!("expected rates for {n} proteins"),
                ));
            }
            for (i, terms) in rate.terms.iter().enumerate() {
                for (j, term) in terms.iter().enumerate() {
                    let path = format!("extremal_systems[{}].production[{}].terms[{}]", k + 1, i + 1, j + 1);
                    if !(term.coeff.is_finite() && term.coeff >= 0.0) {
                        return Err(semantic(format!("{path}.coeff"), "coefficients must be nonnegative"));
                    }
                    for (fi, f) in term.factors.iter().enumerate() {
                        let fpath = format!("{path}.factors[{}]", fi + 1);
                        if f.var >= n {
                            return Err(semantic(format!("{fpath}.var"), "protein index out of range"));
                        }
                        if f.threshold >= thresholds[f.var].len() {
                            return Err(semantic(format!("{fpath}.threshold"), "threshold index out of range"));
                        }
                        let clash = term.factors[..fi]
                            .iter()
                            .any(|g| g.var == f.var && g.threshold == f.threshold && g.sign != f.sign);
                        if clash {
                            return Err(semantic(
                                fpath,
                                "contradictory step factors make the term identically zero",
                            ));
                        }
                    }
                }
            }
        }
        Ok(Self {
            n,
            degradation,
            thresholds,
            bounds,
            extremal,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of extremal systems `L`.
    pub fn extremal_count(&self) -> usize {
        self.extremal.len()
    }

    pub fn degradation(&self) -> &[f64] {
        &self.degradation
    }

    pub fn thresholds(&self) -> &[Vec<f64>] {
        &self.thresholds
    }

    pub fn threshold(&self, var: usize, index: usize) -> f64 {
        self.thresholds[var][index]
    }

    pub fn bounds(&self) -> &[Option<f64>] {
        &self.bounds
    }

    pub fn extremal(&self) -> &[RateFunction] {
        &self.extremal
    }

    /// Replaces the extremal list, keeping thresholds and degradation.
    pub fn with_extremal(&self, extremal: Vec<RateFunction>) -> Result<Self, ModelError> {
        Self::new(
            self.degradation.clone(),
            self.thresholds.clone(),
            self.bounds.clone(),
            extremal,
        )
    }

    /// `f_D^k` for 0-based extremal index `k`.
    pub fn rate_in_domain(&self, k: usize, domain: &Domain) -> Result<Vec<f64>, ModelError> {
        let rate = self.extremal.get(k).ok_or(ModelError::ExtremalIndex {
            index: k + 1,
            count: self.extremal.len(),
        })?;
        if domain.dim() != self.n {
            return Err(ModelError::Dimension {
                expected: self.n,
                got: domain.dim(),
            });
        }
        rate.eval(domain)
    }

    /// `f_D^λ = Σ_k λ_k f_D^k`.
    pub fn instantiate(&self, lambda: &LambdaInstance, domain: &Domain) -> Result<Vec<f64>, ModelError> {
        if lambda.len() != self.extremal.len() {
            return Err(ModelError::Dimension {
                expected: self.extremal.len(),
                got: lambda.len(),
            });
        }
        // Exact identity for λ = e_k.
        if let Some(k) = lambda.vertex_index() {
            return self.rate_in_domain(k, domain);
        }
        let mut out = vec![0.0; self.n];
        for (k, &w) in lambda.weights().iter().enumerate() {
            let f = self.rate_in_domain(k, domain)?;
            for (o, v) in out.iter_mut().zip(f) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// Parses and validates a model file.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
        file.into_model()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_model(self)).expect("model serialization")
    }

    /// SHA-256 of the compact canonical serialization.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(&ModelFile::from_model(self)).expect("model serialization");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// A point of the standard simplex `S_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaInstance(Vec<f64>);

impl LambdaInstance {
    pub fn new(weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::Simplex("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(ModelError::Simplex(format!("negative or non-finite entry {w}")));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(ModelError::Simplex(format!("entries sum to {s}")));
        }
        Ok(Self(weights))
    }

    /// The simplex vertex `e_k` (0-based).
    pub fn vertex(l: usize, k: usize) -> Self {
        let mut w = vec![0.0; l];
        w[k] = 1.0;
        Self(w)
    }

    pub fn uniform(l: usize) -> Self {
        Self(vec![1.0 / l as f64; l])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Some(k)` when this is exactly `e_k`.
    pub fn vertex_index(&self) -> Option<usize> {
        let ones: Vec<usize> = (0..self.0.len()).filter(|&k| self.0[k] == 1.0).collect();
        (ones.len() == 1 && self.0.iter().filter(|&&w| w != 0.0).count() == 1).then(|| ones[0])
    }
}

// ---------------------------------------------------------------------------
// File schema (1-based indices)

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    degradation: Vec<f64>,
    thresholds: Vec<Vec<f64>>,
    #[serde(default)]
    bounds: Option<Vec<Option<f64>>>,
    extremal_systems: Vec<SystemFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    production: Vec<ProductionFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductionFile {
    target: usize,
    terms: Vec<TermFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    coeff: f64,
    #[serde(default)]
    factors: Vec<FactorFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorFile {
    var: usize,
    threshold: usize,
    sign: StepSign,
}

impl ModelFile {
    fn into_model(self) -> Result<UncertainGrn, ModelError> {
        let n = self.n;
        if self.degradation.len() != n {
            return Err(semantic("degradation", format!("expected {n} entries, got {}", self.degradation.len())));
        }
        let bounds = self.bounds.unwrap_or_else(|| vec![None; n]);
        let mut extremal = Vec::with_capacity(self.extremal_systems.len());
        for (k, sys) in self.extremal_systems.into_iter().enumerate() {
            let mut terms: Vec<Option<Vec<ProductTerm>>> = vec![None; n];
            for (pi, prod) in sys.production.into_iter().enumerate() {
                let path = format!("extremal_systems[{}].production[{}]", k + 1, pi + 1);
                if prod.target == 0 || prod.target > n {
                    return Err(semantic(format!("{path}.target"), "protein index out of range"));
                }
                let slot = &mut terms[prod.target - 1];
                if slot.is_some() {
                    return Err(semantic(format!("{path}.target"), "duplicate production entry for protein"));
                }
                let mut list = Vec::with_capacity(prod.terms.len());
                for (ti, t) in prod.terms.into_iter().enumerate() {
                    let mut factors = Vec::with_capacity(t.factors.len());
                    for (fi, f) in t.factors.into_iter().enumerate() {
                        let fpath = format!("{path}.terms[{}].factors[{}]", ti + 1, fi + 1);
                        if f.var == 0 || f.var > n {
                            return Err(semantic(format!("{fpath}.var"), "protein index out of range"));
                        }
                        let m = self.thresholds.get(f.var - 1).map_or(0, |t| t.len());
                        if f.threshold == 0 || f.threshold > m {
                            return Err(semantic(format!("{fpath}.threshold"), "threshold index out of range"));
                        }
                        factors.push(StepFactor {
                            var: f.var - 1,
                            threshold: f.threshold - 1,
                            sign: f.sign,
                        });
                    }
                    list.push(ProductTerm { coeff: t.coeff, factors });
                }
                *slot = Some(list);
            }
            extremal.push(RateFunction {
                terms: terms.into_iter().map(Option::unwrap_or_default).collect(),
            });
        }
        UncertainGrn::new(self.degradation, self.thresholds, bounds, extremal)
    }

    fn from_model(m: &UncertainGrn) -> Self {
        Self {
            n: m.n,
            degradation: m.degradation.clone(),
            thresholds: m.thresholds.clone(),
            bounds: Some(m.bounds.clone()),
            extremal_systems: m
                .extremal
                .iter()
                .map(|rate| SystemFile {
                    production: rate
                        .terms
                        .iter()
                        .enumerate()
                        .map(|(i, terms)| ProductionFile {
                            target: i + 1,
                            terms: terms
                                .iter()
                                .map(|t| TermFile {
                                    coeff: t.coeff,
                                    factors: t
                                        .factors
                                        .iter()
                                        .map(|f| FactorFile {
                                            var: f.var + 1,
                                            threshold: f.threshold + 1,
                                            sign: f.sign,
                                        })
                                        .collect(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::partition::Partition;

    fn example() -> UncertainGrn {
        bundled::sliding_example()
    }

    fn reg(m: &UncertainGrn, label: &str) -> Domain {
        let p = Partition::new(m);
        p.domain(p.find_label(label).unwrap()).clone()
    }

    #[test]
    fn parses_bundled_example() {
        let m = example();
        assert_eq!(m.n(), 2);
        assert_eq!(m.extremal_count(), 4);
        assert_eq!(m.degradation(), &[1.0, 1.0]);
    }

    #[test]
    fn rate_in_domain_matches_example_values() {
        let m = example();
        assert_eq!(m.rate_in_domain(0, &reg(&m, "D1")).unwrap(), vec![2.0, 2.0]);
        assert_eq!(m.rate_in_domain(0, &reg(&m, "D2")).unwrap(), vec![2.0, 0.0]);
        assert_eq!(m.rate_in_domain(3, &reg(&m, "D1")).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn instantiate_vertices_and_uniform() {
        let m = example();
        let d1 = reg(&m, "D1");
        assert_eq!(m.instantiate(&LambdaInstance::vertex(4, 2), &d1).unwrap(), vec![3.0, 2.0]);
        let u = m.instantiate(&LambdaInstance::uniform(4), &d1).unwrap();
        // Independent average of the four extremal values.
        let avg: Vec<f64> = (0..2)
            .map(|i| (0..4).map(|k| m.rate_in_domain(k, &d1).unwrap()[i]).sum::<f64>() / 4.0)
            .collect();
        assert_eq!(avg, vec![2.5, 2.5]);
        for (a, b) in u.iter().zip(&avg) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_zero_degradation_with_path() {
        let text = bundled::SLIDING_EXAMPLE_JSON.replace("\"degradation\": [1.0, 1.0]", "\"degradation\": [1.0, 0.0]");
        let err = UncertainGrn::from_json(&text).unwrap_err();
        match err {
            ModelError::Semantic { path, .. } => assert_eq!(path, "degradation[2]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_increasing_thresholds_and_negative_coeff() {
        let rate = RateFunction {
            terms: vec![vec![ProductTerm { coeff: 1.0, factors: vec![] }]],
        };
        let err = UncertainGrn::new(vec![1.0], vec![vec![2.0, 2.0]], vec![None], vec![rate]).unwrap_err();
        assert!(matches!(err, ModelError::Semantic { ref path, .. } if path == "thresholds[1][2]"));
        let neg = RateFunction {
            terms: vec![vec![ProductTerm { coeff: -1.0, factors: vec![] }]],
        };
        let err = UncertainGrn::new(vec![1.0], vec![vec![1.0]], vec![None], vec![neg]).unwrap_err();
        assert!(matches!(err, ModelError::Semantic { ref path, .. } if path.ends_with("coeff")));
    }

    #[test]
    fn rejects_contradictory_factors() {
        let f = |sign| StepFactor { var: 0, threshold: 0, sign };
        let rate = RateFunction {
            terms: vec![vec![ProductTerm {
                coeff: 1.0,
                factors: vec![f(StepSign::Plus), f(StepSign::Minus)],
            }]],
        };
        assert!(UncertainGrn::new(vec![1.0], vec![vec![1.0]], vec![None], vec![rate]).is_err());
    }

    #[test]
    fn schema_errors_are_reported() {
        assert!(matches!(UncertainGrn::from_json("{\"n\": 2}"), Err(ModelError::Schema(_))));
        assert!(matches!(UncertainGrn::from_json("not json"), Err(ModelError::Schema(_))));
    }

    #[test]
    fn single_system_and_empty_rates() {
        let text = r#"{"n":1,"degradation":[2.0],"thresholds":[[1.0]],
            "extremal_systems":[{"production":[]}]}"#;
        let m = UncertainGrn::from_json(text).unwrap();
        assert_eq!(m.extremal_count(), 1);
        let d = reg(&m, "D1");
        assert_eq!(m.rate_in_domain(0, &d).unwrap(), vec![0.0]);
        assert_eq!(m.instantiate(&LambdaInstance::new(vec![1.0]).unwrap(), &d).unwrap(), vec![0.0]);
    }

    #[test]
    fn switching_domain_rate_is_an_error() {
        let m = example();
        let p = Partition::new(&m);
        let s = p.domains().iter().find(|d| !d.is_regulatory()).unwrap();
        assert_eq!(m.rate_in_domain(0, s), Err(ModelError::SwitchingDomain));
    }

    #[test]
    fn lambda_validation() {
        assert!(LambdaInstance::new(vec![0.5, 0.6]).is_err());
        assert!(LambdaInstance::new(vec![-0.1, 1.1]).is_err());
        assert!(LambdaInstance::new(vec![0.25; 4]).is_ok());
        assert_eq!(LambdaInstance::vertex(3, 1).vertex_index(), Some(1));
        assert_eq!(LambdaInstance::uniform(3).vertex_index(), None);
    }

    #[test]
    fn json_round_trip_is_value_identical() {
        let m = example();
        let again = UncertainGrn::from_json(&m.to_json()).unwrap();
        assert_eq!(m, again);
    }
}
