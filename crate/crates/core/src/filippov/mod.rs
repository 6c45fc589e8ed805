//! Filippov simulation of `σ^λ` and trajectory-based checks of certificates.

mod simulate;
mod verify;

pub use simulate::{
    simulate, simulate_on, sliding_field, Segment, SegmentKind, SimulationError, SimulationSettings, SinkEntry, Trajectory,
};
pub use verify::{
    eval_lyapunov, max_increase, sample_simplex, series_csv, trajectory_json, verify, JobResult, LyapunovSeries, Sample,
    VerificationReport, VerifyError, VerifySettings,
};
