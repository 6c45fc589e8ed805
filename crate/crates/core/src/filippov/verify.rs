//! Sampling `V̂^λ` along simulated trajectories and batch monotonicity checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::simulate::{simulate_on, SegmentKind, SimulationError, SimulationSettings, SinkEntry, Trajectory};
use crate::certify::{CertifyError, Certificate, Mode, PwqFunction};
use crate::model::{LambdaInstance, UncertainGrn};
use crate::partition::{DomainId, Partition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error("no Lyapunov piece for domain {0}")]
    Uncovered(String),
    #[error("sampling step must be positive")]
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub domain: DomainId,
    pub segment: usize,
    pub v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSeries {
    pub samples: Vec<Sample>,
    /// Largest gap between adjacent-domain expressions on sliding segments.
    pub sliding_discrepancy: f64,
}

/// Samples `V` every `dt` inside each segment and at every segment endpoint.
///
/// Segments in flagged sinks carry no value. On a sliding face the value is the
/// mean over the covered adjacent domains.
pub fn eval_lyapunov(
    v: &PwqFunction,
    partition: &Partition,
    traj: &Trajectory,
    dt: f64,
    sinks: &[DomainId],
) -> Result<LyapunovSeries, VerifyError> {
    if !(dt > 0.0) {
        return Err(VerifyError::Step);
    }
    let mut samples = Vec::new();
    let mut disc = 0.0f64;
    for (si, seg) in traj.segments.iter().enumerate() {
        let mut times = Vec::new();
        let mut t = seg.t0;
        while t < seg.t1 {
            times.push(t);
            t += dt;
        }
        times.push(seg.t1);
        for t in times {
            let x = seg.state_at(t);
            let value = match seg.kind {
                SegmentKind::Regulatory => match v.eval(seg.domain, &x) {
                    Some(val) => Some(val),
                    None if sinks.contains(&seg.domain) => None,
                    None => return Err(VerifyError::Uncovered(partition.label(seg.domain))),
                },
                SegmentKind::Sliding => {
                    let vals: Vec<f64> = seg.alpha.iter().filter_map(|(d, _)| v.eval(*d, &x)).collect();
                    if vals.is_empty() {
                        return Err(VerifyError::Uncovered(partition.label(seg.domain)));
                    }
                    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    disc = disc.max(hi - lo);
                    Some(vals.iter().sum::<f64>() / vals.len() as f64)
                }
            };
            samples.push(Sample {
                t,
                x,
                domain: seg.domain,
                segment: si,
                v: value,
            });
        }
    }
    Ok(LyapunovSeries {
        samples,
        sliding_discrepancy: disc,
    })
}

/// Uniform draws on the simplex `S_L` from normalized unit exponentials.
pub fn sample_simplex(l: usize, count: usize, seed: u64) -> Vec<LambdaInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let e: Vec<f64> = (0..l).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = e.iter().sum();
            LambdaInstance::new(e.iter().map(|v| v / s).collect()).expect("normalized draw")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub t_max: f64,
    pub tol: f64,
    pub dt: f64,
    pub simulation: SimulationSettings,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            tol: 1e-7,
            dt: 0.01,
            simulation: SimulationSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub lambda_index: usize,
    pub x0_index: usize,
    pub lambda: Vec<f64>,
    pub x0: Vec<f64>,
    pub pass: bool,
    /// Largest `V(t_{k+1}) − V(t_k)` before sink entry; `-inf` with fewer than two values.
    pub max_increase: f64,
    /// Largest increase measured against `tol·(1 + |V|)`.
    pub max_scaled_increase: f64,
    pub sink_entry: Option<SinkEntry>,
    pub sink_label: Option<String>,
    pub events: usize,
    pub nudged: Vec<usize>,
    pub sliding_discrepancy: f64,
    pub trajectory: Trajectory,
    pub series: LyapunovSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub jobs: Vec<JobResult>,
    pub tol: f64,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.jobs.iter().all(|j| j.pass)
    }

    pub fn failures(&self) -> usize {
        self.jobs.iter().filter(|j| !j.pass).count()
    }

    pub fn to_json(&self) -> Value {
        let jobs: Vec<Value> = self
            .jobs
            .iter()
            .map(|j| {
                json!({
                    "lambda_index": j.lambda_index,
                    "x0_index": j.x0_index,
                    "lambda": j.lambda,
                    "x0": j.x0,
                    "pass": j.pass,
                    "max_increase": finite_or_null(j.max_increase),
                    "sink": j.sink_label,
                    "sink_entry_time": j.sink_entry.map(|s| s.t),
                    "events": j.events,
                    "nudged": j.nudged,
                    "sliding_discrepancy": j.sliding_discrepancy,
                })
            })
            .collect();
        json!({
            "tolerance": self.tol,
            "all_pass": self.all_pass(),
            "failures": self.failures(),
            "jobs": jobs,
        })
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Simulates every `(λ, x0)` pair and checks that `V̂^λ` never increases outside sinks.
pub fn verify(
    model: &UncertainGrn,
    cert: &Certificate,
    lambdas: &[LambdaInstance],
    x0s: &[Vec<f64>],
    settings: &VerifySettings,
) -> Result<VerificationReport, VerifyError> {
    let partition = Partition::new(model);
    let functions: Vec<PwqFunction> = lambdas
        .iter()
        .map(|l| match cert.mode {
            Mode::Common => cert.function_for(l),
            Mode::Extremal => cert.combine(l),
        })
        .collect::<Result<_, _>>()?;
    let keys: Vec<(usize, usize)> = (0..lambdas.len()).flat_map(|a| (0..x0s.len()).map(move |b| (a, b))).collect();
    let mut jobs: Vec<JobResult> = keys
        .par_iter()
        .map(|&(li, xi)| {
            run_job(
                model,
                &partition,
                cert,
                &functions[li],
                &lambdas[li],
                &x0s[xi],
                settings,
                (li, xi),
            )
        })
        .collect::<Result<_, _>>()?;
    jobs.sort_by_key(|j| (j.lambda_index, j.x0_index));
    Ok(VerificationReport {
        jobs,
        tol: settings.tol,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_job(
    model: &UncertainGrn,
    partition: &Partition,
    cert: &Certificate,
    v: &PwqFunction,
    lambda: &LambdaInstance,
    x0: &[f64],
    settings: &VerifySettings,
    key: (usize, usize),
) -> Result<JobResult, VerifyError> {
    let traj = simulate_on(model, partition, lambda, x0, settings.t_max, &settings.simulation)?;
    let series = eval_lyapunov(v, partition, &traj, settings.dt, &cert.excluded_sinks)?;
    let (inc, scaled) = max_increase(&series, settings.tol);
    Ok(JobResult {
        lambda_index: key.0,
        x0_index: key.1,
        lambda: lambda.weights().to_vec(),
        x0: x0.to_vec(),
        pass: scaled <= 1.0,
        max_increase: inc,
        max_scaled_increase: scaled,
        sink_entry: traj.sink_entry,
        sink_label: traj.sink_entry.map(|s| partition.label(s.domain)),
        events: traj.events,
        nudged: traj.nudged.clone(),
        sliding_discrepancy: series.sliding_discrepancy,
        trajectory: traj,
        series,
    })
}

/// Largest raw increase and largest increase relative to `tol·(1 + |V|)`.
pub fn max_increase(series: &LyapunovSeries, tol: f64) -> (f64, f64) {
    let vals: Vec<f64> = series.samples.iter().filter_map(|s| s.v).collect();
    let mut raw = f64::NEG_INFINITY;
    let mut scaled = f64::NEG_INFINITY;
    for w in vals.windows(2) {
        let inc = w[1] - w[0];
        raw = raw.max(inc);
        scaled = scaled.max(inc / (tol * (1.0 + w[0].abs())));
    }
    (raw, scaled)
}

/// CSV with columns `t, x_1..x_n, domain_id, V`.
pub fn series_csv(series: &LyapunovSeries, partition: &Partition, n: usize) -> String {
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x_{i}"));
    }
    out.push_str(",domain_id,V\n");
    for s in &series.samples {
        out.push_str(&format!("{:.16e}", s.t));
        for x in &s.x {
            out.push_str(&format!(",{x:.16e}"));
        }
        out.push_str(&format!(",{}", partition.label(s.domain)));
        match s.v {
            Some(v) => out.push_str(&format!(",{v:.16e}\n")),
            None => out.push_str(",\n"),
        }
    }
    out
}

pub fn trajectory_json(traj: &Trajectory, partition: &Partition) -> Value {
    let segs: Vec<Value> = traj
        .segments
        .iter()
        .map(|s| {
            json!({
                "domain": partition.label(s.domain),
                "kind": s.kind,
                "t0": s.t0,
                "t1": s.t1,
                "x0": s.x0,
                "x1": s.x1,
                "pinned": s.pinned.iter().map(|i| i + 1).collect::<Vec<_>>(),
                "alpha": s.alpha.iter().map(|(d, a)| json!({"domain": partition.label(*d), "weight": a})).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "segments": segs,
        "sink_entry": traj.sink_entry.map(|s| json!({"domain": partition.label(s.domain), "t": s.t})),
        "started_in_sink": traj.started_in_sink,
        "events": traj.events,
        "nudged": traj.nudged.iter().map(|i| i + 1).collect::<Vec<_>>(),
    })
}
