use grncert_core::bundled;
use grncert_core::certify::{certify, CertifyConfig, Certificate, Mode};
use grncert_core::filippov::{sample_simplex, verify, VerifySettings};
use grncert_core::sdp::SolveStatus;

fn example_certificate(mode: Mode) -> Certificate {
    let m = bundled::sliding_example();
    let out = certify(&m, &CertifyConfig::default(), mode).unwrap();
    assert_eq!(out.solution.status, SolveStatus::Feasible);
    out.certificate.unwrap()
}

#[test]
fn extremal_certificate_passes_simulation() {
    let m = bundled::sliding_example();
    let cert = example_certificate(Mode::Extremal);
    assert_eq!(cert.functions.len(), 4);
    assert_eq!(cert.model_hash.as_deref(), Some(m.hash().as_str()));
    let lambdas = sample_simplex(4, 100, 2024);
    let x0s = vec![vec![0.2, 0.5], vec![0.5, 2.5]];
    let report = verify(&m, &cert, &lambdas, &x0s, &VerifySettings::default()).unwrap();
    assert_eq!(report.jobs.len(), 200);
    let worst = report.jobs.iter().map(|j| j.max_increase).fold(f64::NEG_INFINITY, f64::max);
    assert!(report.all_pass(), "{} failures, worst increase {worst:e}", report.failures());
    assert!(report.jobs.iter().all(|j| j.sink_label.as_deref() == Some("D2")));
}

#[test]
fn common_certificate_passes_simulation() {
    let m = bundled::sliding_example();
    let cert = example_certificate(Mode::Common);
    let lambdas = sample_simplex(4, 20, 5);
    let x0s = vec![vec![0.2, 0.5], vec![0.5, 2.5], vec![3.0, 3.0]];
    let report = verify(&m, &cert, &lambdas, &x0s, &VerifySettings::default()).unwrap();
    assert!(report.all_pass());
}

#[test]
fn sign_flipped_certificate_fails() {
    let m = bundled::sliding_example();
    let mut cert = example_certificate(Mode::Extremal);
    for f in &mut cert.functions {
        for piece in f.pieces.values_mut() {
            piece.p *= -1.0;
            piece.d *= -1.0;
            piece.omega *= -1.0;
        }
    }
    let lambdas = sample_simplex(4, 5, 1);
    let report = verify(&m, &cert, &lambdas, &[vec![0.2, 0.5]], &VerifySettings::default()).unwrap();
    assert_eq!(report.failures(), 5);
}

#[test]
fn without_sink_exclusion_is_infeasible() {
    let m = bundled::sliding_example();
    for mode in [Mode::Extremal, Mode::Common] {
        let cfg = CertifyConfig {
            drop_sinks: false,
            ..Default::default()
        };
        let out = certify(&m, &cfg, mode).unwrap();
        assert_ne!(out.solution.status, SolveStatus::Feasible, "{mode:?}");
        assert!(out.certificate.is_err());
    }
}

#[test]
fn zero_horizon_is_vacuous() {
    let m = bundled::sliding_example();
    let cert = example_certificate(Mode::Extremal);
    let settings = VerifySettings {
        t_max: 0.0,
        ..Default::default()
    };
    let report = verify(&m, &cert, &sample_simplex(4, 3, 0), &[vec![0.2, 0.5]], &settings).unwrap();
    assert!(report.all_pass());
}
