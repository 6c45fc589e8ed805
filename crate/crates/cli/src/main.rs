use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use grncert_core::certify::{certify, Certificate, CertifyConfig, CertifyError, Mode};
use grncert_core::filippov::{sample_simplex, series_csv, trajectory_json, verify, VerifySettings};
use grncert_core::json::to_string_pretty;
use grncert_core::model::UncertainGrn;
use grncert_core::partition::{focal_point, sink_domains, Partition, PartitionError};
use grncert_core::polytope::homogenization_cone;
use grncert_core::sdp::SolveStatus;
use grncert_core::stg::{check_assumption1, to_dot};

const EXIT_ASSUMPTION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INACCURATE: u8 = 4;
const EXIT_VERIFY: u8 = 5;

#[derive(Parser)]
#[command(name = "grncert", version, about = "Robust Lyapunov certificates for uncertain PWA gene regulatory networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Domains, focal points, sinks and ray matrices.
    Partition(Common),
    /// State transition graphs per extremal system and the shared-graph check.
    Stg(Common),
    /// Assemble and solve the LMI problem; writes certificate.json when feasible.
    Certify(CertifyArgs),
    /// Simulate sampled systems and check the certificate along trajectories.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Common,
    Extremal,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "extremal")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1e-3)]
    margin: f64,
    #[arg(long)]
    no_drop_sinks: bool,
    /// Residual bound for the independent re-check.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Defaults to OUT/certificate.json.
    #[arg(long)]
    certificate: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    /// Initial state as comma-separated values; repeatable.
    #[arg(long = "x0", value_parser = parse_point, required = true)]
    x0: Vec<Vec<f64>>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"))).collect()
}

/// An error with its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_INPUT,
            error: e.into(),
        }
    }
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure {
        code,
        error: anyhow::anyhow!(msg.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Partition(a) => cmd_partition(&a),
        Command::Stg(a) => cmd_stg(&a),
        Command::Certify(a) => cmd_certify(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(c: &Common) -> Result<UncertainGrn, Failure> {
    let text = fs::read_to_string(&c.model).with_context(|| format!("reading {}", c.model.display()))?;
    let model = UncertainGrn::from_json(&text).with_context(|| format!("parsing {}", c.model.display()))?;
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(model)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn sinks_or_fail(model: &UncertainGrn, p: &Partition) -> Result<Vec<Value>, Failure> {
    match sink_domains(model, p) {
        Ok(s) => Ok(s.iter().map(|d| json!(p.label(*d))).collect()),
        Err(e @ PartitionError::SinkMismatch { .. }) => Err(fail(EXIT_ASSUMPTION, e.to_string())),
        Err(e) => Err(e.into()),
    }
}

fn cmd_partition(a: &Common) -> Result<(), Failure> {
    let model = load(a)?;
    let p = Partition::new(&model);
    let coords = |d: &grncert_core::Domain| {
        d.coords()
            .iter()
            .map(|c| match c {
                grncert_core::partition::Coord::Interval(j) => json!({"interval": j}),
                grncert_core::partition::Coord::Pinned(t) => json!({"threshold": t}),
            })
            .collect::<Vec<_>>()
    };
    let domains: Vec<Value> = p
        .domains()
        .iter()
        .map(|d| {
            json!({
                "id": d.id().0,
                "label": p.label(d.id()),
                "description": p.describe(d.id()),
                "regulatory": d.is_regulatory(),
                "coords": coords(d),
            })
        })
        .collect();
    let mut focal = Vec::new();
    let mut gamma = Vec::new();
    for d in p.regulatory() {
        let phis: Vec<Vec<f64>> = (0..model.extremal_count())
            .map(|k| focal_point(&model, k, d))
            .collect::<Result<_, _>>()?;
        focal.push(json!({"domain": p.label(d.id()), "phi": phis}));
        let g = homogenization_cone(&p.closure::<f64>(d.id()), &1e-9)?;
        gamma.push(json!({
            "domain": p.label(d.id()),
            "n_vertices": g.n_vertices(),
            "columns": g.columns(),
        }));
    }
    let sinks = sinks_or_fail(&model, &p)?;
    let out = json!({
        "model_sha256": model.hash(),
        "n": model.n(),
        "extremal_count": model.extremal_count(),
        "domain_count": p.len(),
        "domains": domains,
        "focal_points": focal,
        "sinks": sinks,
        "ray_matrices": gamma,
    });
    write(&a.out, "partition.json", &to_string_pretty(&out))?;
    println!("{} domains, sinks {:?}", p.len(), out["sinks"]);
    Ok(())
}

fn cmd_stg(a: &Common) -> Result<(), Failure> {
    let model = load(a)?;
    let p = Partition::new(&model);
    let report = check_assumption1(&model, &p)?;
    let label = |d: grncert_core::DomainId| p.label(d);
    for g in &report.graphs {
        let edges: Vec<Value> = g
            .edges
            .iter()
            .map(|e| json!({"from": label(e.from), "to": label(e.to), "kind": e.kind}))
            .collect();
        let degenerate: Vec<Value> = g
            .degenerate
            .iter()
            .map(|d| json!({"domain": label(d.domain), "var": d.var + 1}))
            .collect();
        let k = g.k + 1;
        write(&a.out, &format!("stg_k{k}.dot"), &to_dot(g, &p))?;
        write(
            &a.out,
            &format!("stg_k{k}.json"),
            &to_string_pretty(&json!({"k": k, "edges": edges, "degenerate": degenerate})),
        )?;
    }
    let differing: Vec<Value> = report
        .differing
        .iter()
        .map(|d| json!({"from": label(d.edge.from), "to": label(d.edge.to), "kind": d.edge.kind, "present_in": d.present_in}))
        .collect();
    let out = json!({
        "model_sha256": model.hash(),
        "passed": report.passed,
        "graphs": report.graphs.len(),
        "differing": differing,
    });
    write(&a.out, "assumption1.json", &to_string_pretty(&out))?;
    if !report.passed {
        for d in &report.differing {
            eprintln!("edge {} -> {} present only in {:?}", label(d.edge.from), label(d.edge.to), d.present_in);
        }
        return Err(fail(EXIT_ASSUMPTION, "extremal systems have different transition graphs"));
    }
    println!("{} identical transition graphs", report.graphs.len());
    Ok(())
}

fn cmd_certify(a: &CertifyArgs) -> Result<(), Failure> {
    let model = load(&a.common)?;
    let mode = match a.mode {
        ModeArg::Common => Mode::Common,
        ModeArg::Extremal => Mode::Extremal,
    };
    if !(a.margin >= 0.0) || !(a.tol > 0.0) {
        return Err(fail(EXIT_INPUT, "margin must be nonnegative and tol positive"));
    }
    let config = CertifyConfig {
        margin: a.margin,
        drop_sinks: !a.no_drop_sinks,
        tolerance: a.tol,
        ..Default::default()
    };
    let outcome = certify(&model, &config, mode).map_err(|e| match e {
        CertifyError::Assumption(_) | CertifyError::Partition(PartitionError::SinkMismatch { .. }) => {
            fail(EXIT_ASSUMPTION, e.to_string())
        }
        other => fail(EXIT_INPUT, other.to_string()),
    })?;
    let s = &outcome.solution;
    let status = json!({
        "model_sha256": model.hash(),
        "mode": mode,
        "status": s.status,
        "t_star": s.t_star,
        "iterations": s.iterations,
        "converged": s.converged,
        "box_active": s.box_active,
        "equality_residual": s.equality_residual,
        "scalars": outcome.problem.sdp.n_scalars(),
        "blocks": outcome.problem.sdp.blocks().len(),
        "certificate": outcome.certificate.as_ref().err().map(|e| e.to_string()),
    });
    write(&a.common.out, "solve.json", &to_string_pretty(&status))?;
    eprintln!("solver: {:?}, t* = {:e}, {} iterations, {} ms", s.status, s.t_star, s.iterations, s.runtime_ms);
    match (s.status, &outcome.certificate) {
        (SolveStatus::Feasible, Ok(cert)) => {
            write(&a.common.out, "certificate.json", &to_string_pretty(&cert.to_json()))?;
            println!(
                "feasible: {} function(s) over {} domain(s), max residual {:e}",
                cert.functions.len(),
                cert.domains().len(),
                cert.residuals.max_block
            );
            Ok(())
        }
        (SolveStatus::Feasible, Err(e)) => Err(fail(EXIT_INACCURATE, format!("residual re-check failed: {e}"))),
        (SolveStatus::Infeasible, _) => Err(fail(EXIT_INFEASIBLE, format!("infeasible (t* = {:e})", s.t_star))),
        (SolveStatus::Inaccurate, _) => Err(fail(EXIT_INACCURATE, format!("solver inaccurate (t* = {:e})", s.t_star))),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), Failure> {
    let model = load(&a.common)?;
    let path = a.certificate.clone().unwrap_or_else(|| a.common.out.join("certificate.json"));
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let cert = Certificate::from_json(&value)?;
    match &cert.model_hash {
        Some(h) if *h != model.hash() => {
            return Err(fail(EXIT_INPUT, "certificate was produced for a different model"));
        }
        _ => {}
    }
    if !(a.tmax >= 0.0) || !(a.dt > 0.0) || !(a.tol > 0.0) {
        return Err(fail(EXIT_INPUT, "tmax must be nonnegative, dt and tol positive"));
    }
    let x0s = a.x0.clone();
    if let Some(bad) = x0s.iter().find(|x| x.len() != model.n()) {
        return Err(fail(EXIT_INPUT, format!("x0 {bad:?} has dimension {} (expected {})", bad.len(), model.n())));
    }
    if a.samples == 0 {
        eprintln!("warning: no samples requested; verification is vacuous");
    }
    let lambdas = sample_simplex(model.extremal_count(), a.samples, a.seed);
    let settings = VerifySettings {
        t_max: a.tmax,
        tol: a.tol,
        dt: a.dt,
        ..Default::default()
    };
    let report = verify(&model, &cert, &lambdas, &x0s, &settings)?;
    let p = Partition::new(&model);
    let dir = a.common.out.join("trajectories");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for j in &report.jobs {
        let stem = format!("l{:04}_x{}", j.lambda_index, j.x0_index);
        write(&dir, &format!("{stem}.csv"), &series_csv(&j.series, &p, model.n()))?;
        write(&dir, &format!("{stem}.json"), &to_string_pretty(&trajectory_json(&j.trajectory, &p)))?;
    }
    let mut out = report.to_json();
    out["model_sha256"] = json!(model.hash());
    out["seed"] = json!(a.seed);
    out["samples"] = json!(a.samples);
    out["t_max"] = json!(a.tmax);
    write(&a.common.out, "verification.json", &to_string_pretty(&out))?;
    if !report.all_pass() {
        for j in report.jobs.iter().filter(|j| !j.pass) {
            eprintln!(
                "fail: lambda #{} x0 {:?}: increase {:e}",
                j.lambda_index, j.x0, j.max_increase
            );
        }
        return Err(fail(EXIT_VERIFY, format!("{} of {} trajectories failed", report.failures(), report.jobs.len())));
    }
    println!("{} trajectories pass", report.jobs.len());
    Ok(())
}
