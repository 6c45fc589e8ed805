//! Threshold-induced box partition of the positive orthant.
//!
//! Every variable is either inside an open threshold interval or pinned
//! at a threshold. Domains with no pinned variable are regulatory; the
//! rest are switching domains of codimension `|I_D|`.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, UncertainGrn};
use crate::polytope::HPolyhedron;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("domain {0} is not a switching domain")]
    NotSwitching(String),
    #[error("domain {0} is not a regulatory domain")]
    NotRegulatory(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("assumption violated: sink domain sets differ between extremal systems {pairs:?}")]
    SinkMismatch { pairs: Vec<(usize, usize)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DomainId(pub usize);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Per-variable position: open interval index (0 = below the first
/// threshold) or pinned at a 0-based threshold index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    Interval(usize),
    Pinned(usize),
}

impl Coord {
    fn code(self) -> usize {
        match self {
            Coord::Interval(j) => 2 * j,
            Coord::Pinned(t) => 2 * t + 1,
        }
    }

    fn from_code(c: usize) -> Self {
        if c % 2 == 0 {
            Coord::Interval(c / 2)
        } else {
            Coord::Pinned(c / 2)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Domain {
    id: DomainId,
    coords: Vec<Coord>,
}

impl Domain {
    pub fn id(&self) -> DomainId {
        self.id
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_regulatory(&self) -> bool {
        self.coords.iter().all(|c| matches!(c, Coord::Interval(_)))
    }

    /// `I_D`: indices of pinned variables, ascending.
    pub fn pinned_vars(&self) -> Vec<usize> {
        (0..self.coords.len())
            .filter(|&i| matches!(self.coords[i], Coord::Pinned(_)))
            .collect()
    }

    pub fn codim(&self) -> usize {
        self.pinned_vars().len()
    }
}

/// All domains of every codimension over the threshold grid.
#[derive(Debug, Clone)]
pub struct Partition {
    thresholds: Vec<Vec<f64>>,
    bounds: Vec<Option<f64>>,
    radix: Vec<usize>,
    domains: Vec<Domain>,
}

impl Partition {
    pub fn new(model: &UncertainGrn) -> Self {
        let thresholds = model.thresholds().to_vec();
        let radix: Vec<usize> = thresholds.iter().map(|t| 2 * t.len() + 1).collect();
        let total: usize = radix.iter().product();
        let domains = (0..total)
            .map(|id| {
                let mut rest = id;
                let coords = radix
                    .iter()
                    .map(|&r| {
                        let c = rest % r;
                        rest /= r;
                        Coord::from_code(c)
                    })
                    .collect();
                Domain {
                    id: DomainId(id),
                    coords,
                }
            })
            .collect();
        Self {
            thresholds,
            bounds: model.bounds().to_vec(),
            radix,
            domains,
        }
    }

    pub fn dim(&self) -> usize {
        self.radix.len()
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn domain(&self, id: DomainId) -> &Domain {
        &self.domains[id.0]
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn regulatory(&self) -> impl Iterator<Item = &Domain> {
        self.domains.iter().filter(|d| d.is_regulatory())
    }

    pub fn switching(&self) -> impl Iterator<Item = &Domain> {
        self.domains.iter().filter(|d| !d.is_regulatory())
    }

    pub fn id_of(&self, coords: &[Coord]) -> DomainId {
        let mut id = 0;
        let mut scale = 1;
        for (c, r) in coords.iter().zip(&self.radix) {
            id += c.code() * scale;
            scale *= r;
        }
        DomainId(id)
    }

    /// Regulatory domains are numbered `D1, D2, …` with the first variable varying fastest.
    pub fn regulatory_number(&self, id: DomainId) -> Option<usize> {
        let d = self.domain(id);
        let mut num = 0;
        let mut scale = 1;
        for (i, c) in d.coords.iter().enumerate() {
            match c {
                Coord::Interval(j) => num += j * scale,
                Coord::Pinned(_) => return None,
            }
            scale *= self.thresholds[i].len() + 1;
        }
        Some(num + 1)
    }

    /// `D<k>` for regulatory domains, a per-variable description otherwise.
    pub fn label(&self, id: DomainId) -> String {
        match self.regulatory_number(id) {
            Some(k) => format!("D{k}"),
            None => self.describe(id),
        }
    }

    /// Per-variable description such as `x1:(0,1) x2=1`.
    pub fn describe(&self, id: DomainId) -> String {
        let d = self.domain(id);
        d.coords
            .iter()
            .enumerate()
            .map(|(i, c)| match *c {
                Coord::Pinned(t) => format!("x{}={}", i + 1, self.thresholds[i][t]),
                Coord::Interval(j) => {
                    let (lo, hi) = self.interval(i, j);
                    match hi {
                        Some(h) => format!("x{}:({},{})", i + 1, lo, h),
                        None => format!("x{}:({},inf)", i + 1, lo),
                    }
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn find_label(&self, label: &str) -> Option<DomainId> {
        self.domains.iter().map(|d| d.id).find(|&id| self.label(id) == label)
    }

    /// Bounds of the `j`-th open interval of variable `var`; `None` for an unbounded top.
    pub fn interval(&self, var: usize, j: usize) -> (f64, Option<f64>) {
        let th = &self.thresholds[var];
        let lo = if j == 0 { 0.0 } else { th[j - 1] };
        let hi = if j < th.len() { Some(th[j]) } else { self.bounds[var] };
        (lo, hi)
    }

    pub fn threshold(&self, var: usize, t: usize) -> f64 {
        self.thresholds[var][t]
    }

    pub fn threshold_count(&self, var: usize) -> usize {
        self.thresholds[var].len()
    }

    /// Whether `x` lies in the open box of a regulatory domain.
    pub fn contains_open(&self, id: DomainId, x: &[f64]) -> bool {
        self.domain(id).coords.iter().enumerate().all(|(i, c)| match *c {
            Coord::Interval(j) => {
                let (lo, hi) = self.interval(i, j);
                x[i] > lo && hi.map_or(true, |h| x[i] < h)
            }
            Coord::Pinned(t) => x[i] == self.thresholds[i][t],
        })
    }

    /// Sink membership test: open at thresholds, closed at the orthant boundary `x_i = 0`.
    pub fn holds_focal(&self, id: DomainId, phi: &[f64]) -> bool {
        self.domain(id).coords.iter().enumerate().all(|(i, c)| match *c {
            Coord::Interval(j) => {
                let (lo, hi) = self.interval(i, j);
                let above = if j == 0 { phi[i] >= 0.0 } else { phi[i] > lo };
                above && hi.map_or(true, |h| phi[i] < h)
            }
            Coord::Pinned(_) => false,
        })
    }

    /// The regulatory domain whose open box contains `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<DomainId> {
        let mut coords = Vec::with_capacity(x.len());
        for (i, &xi) in x.iter().enumerate() {
            let th = &self.thresholds[i];
            if th.iter().any(|&t| t == xi) {
                return None;
            }
            coords.push(Coord::Interval(th.iter().filter(|&&t| t < xi).count()));
        }
        Some(self.id_of(&coords))
    }

    /// `R(D_s)`: regulatory domains adjacent to a switching domain, ordered by id.
    pub fn adjacent_regulatory(&self, id: DomainId) -> Result<Vec<DomainId>, PartitionError> {
        let d = self.domain(id);
        let pinned = d.pinned_vars();
        if pinned.is_empty() {
            return Err(PartitionError::NotSwitching(self.label(id)));
        }
        let mut out: Vec<DomainId> = (0..1usize << pinned.len())
            .map(|mask| {
                let mut coords = d.coords.clone();
                for (bit, &v) in pinned.iter().enumerate() {
                    if let Coord::Pinned(t) = coords[v] {
                        coords[v] = Coord::Interval(if mask >> bit & 1 == 1 { t + 1 } else { t });
                    }
                }
                self.id_of(&coords)
            })
            .collect();
        out.sort();
        Ok(out)
    }

    /// Switching domains whose closure touches the closure of regulatory `id`.
    pub fn incident_switching(&self, id: DomainId) -> Vec<DomainId> {
        self.switching()
            .filter(|s| {
                self.adjacent_regulatory(s.id)
                    .map(|r| r.contains(&id))
                    .unwrap_or(false)
            })
            .map(|s| s.id)
            .collect()
    }

    /// Closed box `cl(D)` as an H-polyhedron.
    pub fn closure<T: Scalar>(&self, id: DomainId) -> HPolyhedron<T> {
        let n = self.dim();
        let d = self.domain(id);
        let mut h = HPolyhedron::new(n);
        for (i, c) in d.coords.iter().enumerate() {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            match *c {
                Coord::Pinned(t) => h.push_eq(e, T::from_f64_lossy(self.thresholds[i][t])),
                Coord::Interval(j) => {
                    let (lo, hi) = self.interval(i, j);
                    let neg: Vec<T> = e.iter().map(|v| -v.clone()).collect();
                    h.push_ineq(neg, T::from_f64_lossy(-lo));
                    if let Some(hi) = hi {
                        h.push_ineq(e, T::from_f64_lossy(hi));
                    }
                }
            }
        }
        h
    }
}

/// `φ^k(D) = C⁻¹ f_D^k` (0-based `k`).
pub fn focal_point(model: &UncertainGrn, k: usize, domain: &Domain) -> Result<Vec<f64>, ModelError> {
    let f = model.rate_in_domain(k, domain)?;
    Ok(focal_from_rate(model, &f))
}

pub fn focal_from_rate(model: &UncertainGrn, f: &[f64]) -> Vec<f64> {
    f.iter().zip(model.degradation()).map(|(fi, ci)| fi / ci).collect()
}

/// Sink domains of extremal system `k`.
pub fn sinks_of(model: &UncertainGrn, partition: &Partition, k: usize) -> Result<BTreeSet<DomainId>, ModelError> {
    let mut out = BTreeSet::new();
    for d in partition.regulatory() {
        let phi = focal_point(model, k, d)?;
        if partition.holds_focal(d.id(), &phi) {
            out.insert(d.id());
        }
    }
    Ok(out)
}

/// Regulatory domains that contain their own focal point for every extremal system.
///
/// Fails when two extremal systems disagree on the sink set.
pub fn sink_domains(model: &UncertainGrn, partition: &Partition) -> Result<BTreeSet<DomainId>, PartitionError> {
    let sets: Vec<BTreeSet<DomainId>> = (0..model.extremal_count())
        .map(|k| sinks_of(model, partition, k))
        .collect::<Result<_, _>>()?;
    let mut pairs = Vec::new();
    for k in 0..sets.len() {
        for j in (k + 1)..sets.len() {
            if sets[k] != sets[j] {
                pairs.push((k + 1, j + 1));
            }
        }
    }
    if !pairs.is_empty() {
        return Err(PartitionError::SinkMismatch { pairs });
    }
    Ok(sets.into_iter().next().unwrap_or_default())
}
