//! Event-driven closed-form simulation of `σ^λ` with sliding modes.
//!
//! Inside a regulatory domain or along a sliding face every coordinate
//! obeys `ẋ_i = c_i (φ_i − x_i)` for a constant `φ`, so states and
//! threshold-hitting times are exact exponentials. At each event the next
//! mode is chosen among the faces and boxes incident to the current point.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::model::{LambdaInstance, ModelError, UncertainGrn};
use crate::partition::{Coord, DomainId, Partition, PartitionError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("initial state must be finite, nonnegative and of dimension {0}")]
    InitialState(usize),
    /// Carries the trajectory computed before the limit was hit.
    #[error("event limit exceeded ({events} events by t = {t})")]
    Zeno { events: usize, t: f64, trajectory: Box<Trajectory> },
    #[error("pinning equations have no solution on face {0}")]
    Inconsistent(String),
    #[error("face {0} is not sliding")]
    NotSliding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Regulatory,
    Sliding,
}

/// One analytic piece `x_i(t) = φ_i + (x_i(t0) − φ_i) e^{−c_i (t − t0)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub domain: DomainId,
    pub kind: SegmentKind,
    pub t0: f64,
    pub t1: f64,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    /// Pinned variables (sliding only).
    pub pinned: Vec<usize>,
    /// Filippov weights over the adjacent regulatory domains (sliding only).
    pub alpha: Vec<(DomainId, f64)>,
    /// Per-coordinate asymptote; equals the threshold on pinned coordinates.
    pub focal: Vec<f64>,
    pub rates: Vec<f64>,
}

impl Segment {
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let dt = t - self.t0;
        (0..self.x0.len())
            .map(|i| {
                if self.pinned.contains(&i) {
                    self.x0[i]
                } else {
                    self.focal[i] + (self.x0[i] - self.focal[i]) * (-self.rates[i] * dt).exp()
                }
            })
            .collect()
    }

    pub fn velocity_at(&self, t: f64) -> Vec<f64> {
        let x = self.state_at(t);
        (0..x.len())
            .map(|i| {
                if self.pinned.contains(&i) {
                    0.0
                } else {
                    self.rates[i] * (self.focal[i] - x[i])
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinkEntry {
    pub domain: DomainId,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    /// Set when the trajectory enters a sink of `σ^λ` after the start.
    pub sink_entry: Option<SinkEntry>,
    /// The initial domain is itself a sink.
    pub started_in_sink: bool,
    /// Variables nudged off a threshold at the start.
    pub nudged: Vec<usize>,
    pub events: usize,
    /// Faces where the minimum-norm rule picked among several weight vectors.
    pub weight_ties: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    /// Events within this time window are simultaneous.
    pub tie_tol: f64,
    pub max_events: usize,
    /// Consecutive zero-duration events before pinning is forced.
    pub chatter_limit: usize,
    pub nudge: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            tie_tol: 1e-12,
            max_events: 100_000,
            chatter_limit: 50,
            nudge: 1e-12,
        }
    }
}

/// Which side of a threshold a regulatory coordinate lies on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Choice {
    Below,
    Pinned,
    Above,
}

enum Mode {
    Regulatory(DomainId),
    Sliding {
        face: DomainId,
        alpha: Vec<(DomainId, f64)>,
        focal: Vec<f64>,
    },
}

struct Ctx<'a> {
    model: &'a UncertainGrn,
    partition: &'a Partition,
    lambda: &'a LambdaInstance,
}

impl Ctx<'_> {
    fn focal(&self, d: DomainId) -> Result<Vec<f64>, ModelError> {
        let f = self.model.instantiate(self.lambda, self.partition.domain(d))?;
        Ok(f.iter().zip(self.model.degradation()).map(|(a, c)| a / c).collect())
    }

    fn rate(&self, d: DomainId) -> Result<Vec<f64>, ModelError> {
        self.model.instantiate(self.lambda, self.partition.domain(d))
    }
}

/// Minimum-norm `α ≥ 0`, `Σα = 1` with `Σ_D' α_D' (f_{D',i} − c_i θ_i) = 0` for pinned `i`.
///
/// Returns the weights and whether another support also admitted a solution.
pub(crate) fn pinning_weights(rows: &[Vec<f64>]) -> Option<(Vec<f64>, bool)> {
    let q = rows.first().map_or(0, Vec::len);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut found = 0;
    for mask in 1usize..(1 << q) {
        let support: Vec<usize> = (0..q).filter(|&j| mask >> j & 1 == 1).collect();
        let m = rows.len() + 1;
        let a = DMatrix::from_fn(m, support.len(), |i, j| if i < rows.len() { rows[i][support[j]] } else { 1.0 });
        let mut b = DVector::zeros(m);
        b[m - 1] = 1.0;
        let Ok(pinv) = a.clone().pseudo_inverse(1e-13) else { continue };
        let sol = &pinv * &b;
        let scale = rows.iter().flatten().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if (&a * &sol - &b).amax() > 1e-12 * scale || sol.iter().any(|&v| v < -1e-14) {
            continue;
        }
        found += 1;
        let mut full = vec![0.0; q];
        for (k, &j) in support.iter().enumerate() {
            full[j] = sol[k].max(0.0);
        }
        let s: f64 = full.iter().sum();
        full.iter_mut().for_each(|v| *v /= s);
        let norm: f64 = full.iter().map(|v| v * v).sum();
        if best.as_ref().map_or(true, |(bn, _)| norm < bn - 1e-15) {
            best = Some((norm, full));
        }
    }
    best.map(|(_, w)| (w, found > 1))
}

/// Sliding velocity `Σ α_D' f^λ_{D'} − C x` on face `face` and its weights.
pub fn sliding_field(
    model: &UncertainGrn,
    partition: &Partition,
    lambda: &LambdaInstance,
    face: DomainId,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<(DomainId, f64)>), SimulationError> {
    let ctx = Ctx { model, partition, lambda };
    let (alpha, focal, _) = sliding_mode(&ctx, face, true)?.ok_or_else(|| SimulationError::NotSliding(partition.label(face)))?;
    let c = model.degradation();
    let pinned = partition.domain(face).pinned_vars();
    let v = (0..x.len())
        .map(|i| if pinned.contains(&i) { 0.0 } else { c[i] * (focal[i] - x[i]) })
        .collect();
    Ok((v, alpha))
}

type SlideData = (Vec<(DomainId, f64)>, Vec<f64>, bool);

/// Weights and asymptote of the sliding motion on `face`; `None` if not sliding.
fn sliding_mode(ctx: &Ctx<'_>, face: DomainId, require_attracting: bool) -> Result<Option<SlideData>, SimulationError> {
    let p = ctx.partition;
    let d = p.domain(face);
    let pinned = d.pinned_vars();
    let adj = p.adjacent_regulatory(face)?;
    let c = ctx.model.degradation();
    let thetas: Vec<f64> = pinned
        .iter()
        .map(|&i| match d.coords()[i] {
            Coord::Pinned(t) => p.threshold(i, t),
            Coord::Interval(_) => unreachable!(),
        })
        .collect();
    let rates: Vec<Vec<f64>> = adj.iter().map(|&r| ctx.rate(r)).collect::<Result<_, _>>()?;
    if require_attracting {
        for (ri, &r) in adj.iter().enumerate() {
            for (k, &i) in pinned.iter().enumerate() {
                let phi = rates[ri][i] / c[i];
                let below = matches!((p.domain(r).coords()[i], d.coords()[i]), (Coord::Interval(j), Coord::Pinned(t)) if j == t);
                let toward = if below { phi > thetas[k] } else { phi < thetas[k] };
                if !toward {
                    return Ok(None);
                }
            }
        }
    }
    let rows: Vec<Vec<f64>> = pinned
        .iter()
        .zip(&thetas)
        .map(|(&i, &th)| rates.iter().map(|f| f[i] - c[i] * th).collect())
        .collect();
    let Some((w, tie)) = pinning_weights(&rows) else {
        return Ok(None);
    };
    let n = ctx.model.n();
    let focal: Vec<f64> = (0..n)
        .map(|i| {
            if let Some(k) = pinned.iter().position(|&v| v == i) {
                thetas[k]
            } else {
                rates.iter().zip(&w).map(|(f, a)| a * f[i]).sum::<f64>() / c[i]
            }
        })
        .collect();
    Ok(Some((adj.into_iter().zip(w).collect(), focal, tie)))
}

/// Time until coordinate `i` leaves `(lo, hi)` moving toward `phi`; infinite if never.
fn exit_time(x: f64, phi: f64, c: f64, lo: f64, hi: Option<f64>, lo_is_threshold: bool) -> f64 {
    if phi > x {
        match hi {
            Some(h) if phi > h => ((phi - x) / (phi - h)).ln() / c,
            _ => f64::INFINITY,
        }
    } else if phi < x && lo_is_threshold && phi < lo {
        ((x - phi) / (lo - phi)).ln() / c
    } else {
        f64::INFINITY
    }
}

/// Open interval around coordinate `i` given its current descriptor, bounded by thresholds only.
fn threshold_interval(p: &Partition, i: usize, coord: Coord) -> (f64, Option<f64>, bool) {
    match coord {
        Coord::Interval(j) => {
            let lo = if j == 0 { 0.0 } else { p.threshold(i, j - 1) };
            let hi = (j < p.threshold_count(i)).then(|| p.threshold(i, j));
            (lo, hi, j > 0)
        }
        Coord::Pinned(t) => {
            let th = p.threshold(i, t);
            (th, Some(th), true)
        }
    }
}

pub fn simulate(
    model: &UncertainGrn,
    lambda: &LambdaInstance,
    x0: &[f64],
    t_max: f64,
    settings: &SimulationSettings,
) -> Result<Trajectory, SimulationError> {
    let partition = Partition::new(model);
    simulate_on(model, &partition, lambda, x0, t_max, settings)
}

pub fn simulate_on(
    model: &UncertainGrn,
    partition: &Partition,
    lambda: &LambdaInstance,
    x0: &[f64],
    t_max: f64,
    settings: &SimulationSettings,
) -> Result<Trajectory, SimulationError> {
    let n = model.n();
    if x0.len() != n || x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(SimulationError::InitialState(n));
    }
    if lambda.len() != model.extremal_count() {
        return Err(ModelError::Dimension {
            expected: model.extremal_count(),
            got: lambda.len(),
        }
        .into());
    }
    let ctx = Ctx {
        model,
        partition,
        lambda,
    };
    let c = model.degradation().to_vec();
    let mut traj = Trajectory {
        segments: Vec::new(),
        sink_entry: None,
        started_in_sink: false,
        nudged: Vec::new(),
        events: 0,
        weight_ties: 0,
    };
    let mut x = x0.to_vec();
    let mut t = 0.0;

    let on_threshold: Vec<usize> = (0..n)
        .filter(|&i| (0..partition.threshold_count(i)).any(|k| partition.threshold(i, k) == x[i]))
        .collect();
    let mut mode = if on_threshold.is_empty() {
        Mode::Regulatory(partition.locate(&x).expect("off-threshold point has a domain"))
    } else {
        let base = base_coords(partition, &x);
        let m = choose(&ctx, &x, &on_threshold, &base, false, &mut traj)?;
        if let Mode::Regulatory(d) = &m {
            // Move strictly inside the chosen box.
            for &i in &on_threshold {
                if let Coord::Interval(j) = partition.domain(*d).coords()[i] {
                    let (lo, _, _) = threshold_interval(partition, i, Coord::Interval(j));
                    x[i] += if x[i] == lo { settings.nudge } else { -settings.nudge };
                    traj.nudged.push(i);
                }
            }
        }
        m
    };

    let mut zero_run = 0;
    let mut first = true;
    while t < t_max {
        let (domain, kind, pinned, alpha, focal) = match &mode {
            Mode::Regulatory(d) => {
                let phi = ctx.focal(*d)?;
                if partition.holds_focal(*d, &phi) {
                    if first {
                        traj.started_in_sink = true;
                    } else {
                        traj.sink_entry = Some(SinkEntry { domain: *d, t });
                        break;
                    }
                }
                (*d, SegmentKind::Regulatory, Vec::new(), Vec::new(), phi)
            }
            Mode::Sliding { face, alpha, focal } => (
                *face,
                SegmentKind::Sliding,
                partition.domain(*face).pinned_vars(),
                alpha.clone(),
                focal.clone(),
            ),
        };
        first = false;
        let coords = partition.domain(domain).coords().to_vec();
        let mut tau = f64::INFINITY;
        let mut times = vec![f64::INFINITY; n];
        for i in (0..n).filter(|i| !pinned.contains(i)) {
            let (lo, hi, lo_th) = threshold_interval(partition, i, coords[i]);
            times[i] = exit_time(x[i], focal[i], c[i], lo, hi, lo_th);
            tau = tau.min(times[i]);
        }
        let t_end = (t + tau).min(t_max);
        let seg = Segment {
            domain,
            kind,
            t0: t,
            t1: t_end,
            x0: x.clone(),
            x1: Vec::new(),
            pinned: pinned.clone(),
            alpha,
            focal,
            rates: c.clone(),
        };
        let mut x1 = seg.state_at(t_end);
        let hit: Vec<usize> = (0..n).filter(|&i| times[i].is_finite() && t + times[i] <= t_end + settings.tie_tol).collect();
        let reached_event = t + tau <= t_max;
        if reached_event {
            for &i in &hit {
                let (lo, hi, _) = threshold_interval(partition, i, coords[i]);
                x1[i] = if seg.focal[i] > x[i] { hi.expect("upper threshold") } else { lo };
            }
        }
        let mut seg = seg;
        seg.x1 = x1.clone();
        zero_run = if t_end - t <= settings.tie_tol { zero_run + 1 } else { 0 };
        traj.segments.push(seg);
        x = x1;
        t = t_end;
        if !reached_event {
            break;
        }
        traj.events += 1;
        if traj.events > settings.max_events {
            return Err(SimulationError::Zeno {
                events: traj.events,
                t,
                trajectory: Box::new(traj),
            });
        }
        let mut j: Vec<usize> = pinned.iter().copied().chain(hit.iter().copied()).collect();
        j.sort_unstable();
        j.dedup();
        let mut base = coords.clone();
        for &i in &hit {
            let th_idx = (0..partition.threshold_count(i)).find(|&k| partition.threshold(i, k) == x[i]).expect("hit threshold");
            base[i] = Coord::Pinned(th_idx);
        }
        mode = choose(&ctx, &x, &j, &base, zero_run > settings.chatter_limit, &mut traj)?;
    }
    Ok(traj)
}

/// Coordinates with every on-threshold variable pinned.
fn base_coords(p: &Partition, x: &[f64]) -> Vec<Coord> {
    (0..x.len())
        .map(|i| {
            let th: Vec<f64> = (0..p.threshold_count(i)).map(|k| p.threshold(i, k)).collect();
            match th.iter().position(|&v| v == x[i]) {
                Some(k) => Coord::Pinned(k),
                None => Coord::Interval(th.iter().filter(|&&v| v < x[i]).count()),
            }
        })
        .collect()
}

/// Picks the next mode at a point where the variables `j` sit on thresholds.
///
/// Candidates put each such variable below, on, or above its threshold. The valid
/// candidate with the fewest pinned variables wins, ties broken lexicographically.
fn choose(
    ctx: &Ctx<'_>,
    x: &[f64],
    j: &[usize],
    base: &[Coord],
    force_pin: bool,
    traj: &mut Trajectory,
) -> Result<Mode, SimulationError> {
    let p = ctx.partition;
    let c = ctx.model.degradation();
    let mut cands: Vec<Vec<Choice>> = vec![Vec::new()];
    for _ in j {
        cands = cands
            .into_iter()
            .flat_map(|v| {
                [Choice::Below, Choice::Pinned, Choice::Above].into_iter().map(move |ch| {
                    let mut w = v.clone();
                    w.push(ch);
                    w
                })
            })
            .collect();
    }
    let pins = |v: &[Choice]| v.iter().filter(|c| **c == Choice::Pinned).count();
    cands.sort_by_key(|v| {
        (
            pins(v),
            v.iter()
                .map(|c| match c {
                    Choice::Below => 0,
                    Choice::Pinned => 1,
                    Choice::Above => 2,
                })
                .collect::<Vec<u8>>(),
        )
    });
    if force_pin {
        cands.retain(|v| pins(v) == j.len());
    }
    let coords_for = |v: &[Choice]| -> Vec<Coord> {
        let mut out = base.to_vec();
        for (&i, ch) in j.iter().zip(v) {
            let Coord::Pinned(t) = base[i] else { unreachable!("event variables are pinned") };
            out[i] = match ch {
                Choice::Below => Coord::Interval(t),
                Choice::Pinned => Coord::Pinned(t),
                Choice::Above => Coord::Interval(t + 1),
            };
        }
        out
    };
    let theta = |i: usize| match base[i] {
        Coord::Pinned(t) => p.threshold(i, t),
        Coord::Interval(_) => unreachable!(),
    };
    let moves = |ch: Choice, v: f64| match ch {
        Choice::Below => v < 0.0,
        Choice::Above => v > 0.0,
        Choice::Pinned => true,
    };
    for strict in [true, false] {
        for v in &cands {
            let id = p.id_of(&coords_for(v));
            if pins(v) == 0 {
                if !strict {
                    continue;
                }
                let phi = ctx.focal(id)?;
                let ok = j.iter().zip(v).all(|(&i, &ch)| moves(ch, phi[i] - theta(i)));
                if ok {
                    return Ok(Mode::Regulatory(id));
                }
            } else if let Some((alpha, focal, tie)) = sliding_mode(ctx, id, strict && !force_pin)? {
                let ok = j
                    .iter()
                    .zip(v)
                    .filter(|(_, ch)| **ch != Choice::Pinned)
                    .all(|(&i, &ch)| moves(ch, c[i] * (focal[i] - x[i])));
                if ok {
                    if tie {
                        traj.weight_ties += 1;
                    }
                    return Ok(Mode::Sliding { face: id, alpha, focal });
                }
            }
        }
    }
    let v: Vec<Choice> = j.iter().map(|_| Choice::Pinned).collect();
    Err(SimulationError::Inconsistent(p.label(p.id_of(&coords_for(&v)))))
}
