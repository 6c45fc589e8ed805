mod common;

use grncert_core::bundled;
use grncert_core::filippov::{simulate, SegmentKind, SimulationSettings};
use grncert_core::model::LambdaInstance;
use grncert_core::partition::Partition;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{check_trajectory, random_model, random_point};

#[test]
fn example_trajectory_matches_closed_form() {
    let m = bundled::sliding_example();
    let tr = simulate(&m, &LambdaInstance::vertex(4, 0), &[0.2, 0.5], 10.0, &SimulationSettings::default()).unwrap();
    // D1 toward (2, 2): x1 = 2 − 1.8 e^{−t}, x2 = 2 − 1.5 e^{−t}.
    let d1 = &tr.segments[0];
    for t in [0.0, 0.1, 0.3, d1.t1] {
        let x = d1.state_at(t);
        assert!((x[0] - (2.0 - 1.8 * (-t).exp())).abs() < 1e-14);
        assert!((x[1] - (2.0 - 1.5 * (-t).exp())).abs() < 1e-14);
    }
    // Along x2 = 1 the free coordinate keeps the same exponential.
    let s = &tr.segments[1];
    assert_eq!(s.kind, SegmentKind::Sliding);
    for t in [s.t0, 0.5 * (s.t0 + s.t1), s.t1] {
        let x = s.state_at(t);
        assert!((x[0] - (2.0 - 1.8 * (-t).exp())).abs() < 1e-12);
        assert_eq!(x[1], 1.0);
    }
}

#[test]
fn second_start_point_reaches_the_sink() {
    let m = bundled::sliding_example();
    let p = Partition::new(&m);
    for k in 0..4 {
        let tr = simulate(&m, &LambdaInstance::vertex(4, k), &[0.5, 2.5], 20.0, &SimulationSettings::default()).unwrap();
        let sink = tr.sink_entry.expect("enters a sink");
        assert_eq!(p.label(sink.domain), "D2");
        check_trajectory(&m, &p, &LambdaInstance::vertex(4, k), &tr).unwrap();
    }
}

#[test]
fn vertex_lambda_matches_single_system() {
    let m = bundled::sliding_example();
    for k in 0..m.extremal_count() {
        let single = m.with_extremal(vec![m.extremal()[k].clone()]).unwrap();
        for x0 in [[0.2, 0.5], [0.5, 2.5], [2.4, 1.7]] {
            let a = simulate(&m, &LambdaInstance::vertex(4, k), &x0, 6.0, &SimulationSettings::default()).unwrap();
            let b = simulate(&single, &LambdaInstance::vertex(1, 0), &x0, 6.0, &SimulationSettings::default()).unwrap();
            assert_eq!(a.segments.len(), b.segments.len());
            for (sa, sb) in a.segments.iter().zip(&b.segments) {
                for t in [sa.t0, 0.5 * (sa.t0 + sa.t1), sa.t1] {
                    let (xa, xb) = (sa.state_at(t), sb.state_at(t));
                    assert!(xa.iter().zip(&xb).all(|(p, q)| (p - q).abs() <= 1e-8));
                }
            }
        }
    }
}

#[test]
fn zero_production_decays_without_upward_events() {
    let text = r#"{"n":2,"degradation":[1.0,2.0],"thresholds":[[1.0],[0.5,1.5]],
        "extremal_systems":[{"production":[]}]}"#;
    let m = grncert_core::UncertainGrn::from_json(text).unwrap();
    let tr = simulate(&m, &LambdaInstance::vertex(1, 0), &[3.0, 2.0], 8.0, &SimulationSettings::default()).unwrap();
    // Crossings: x1 = 1, x2 = 1.5, x2 = 0.5, each downward.
    assert_eq!(tr.events, 3);
    for s in &tr.segments {
        assert!(s.x1.iter().zip(&s.x0).all(|(b, a)| b <= a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn random_models_keep_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 3, 3);
        let p = Partition::new(&m);
        for lambda in grncert_core::filippov::sample_simplex(m.extremal_count(), 3, seed) {
            let x0 = random_point(&mut rng, &m);
            let tr = match simulate(&m, &lambda, &x0, 10.0, &SimulationSettings::default()) {
                Ok(tr) => tr,
                Err(grncert_core::filippov::SimulationError::Zeno { trajectory, .. }) => *trajectory,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            if let Err(e) = check_trajectory(&m, &p, &lambda, &tr) {
                prop_assert!(false, "{}", e);
            }
        }
    }
}
