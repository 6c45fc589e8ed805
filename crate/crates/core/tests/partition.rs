mod common;

use grncert_core::partition::{sink_domains, Partition};
use grncert_core::polytope::homogenization_cone;
use grncert_core::stg::build_stg;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{in_cone, random_model, random_point};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn domain_count_is_product(seed in any::<u64>()) {
        let m = random_model(&mut ChaCha8Rng::seed_from_u64(seed), 3, 2);
        let expected: usize = m.thresholds().iter().map(|t| 2 * t.len() + 1).product();
        prop_assert_eq!(Partition::new(&m).len(), expected);
    }

    #[test]
    fn sinks_ignore_extremal_order(seed in any::<u64>()) {
        let m = random_model(&mut ChaCha8Rng::seed_from_u64(seed), 3, 3);
        let p = Partition::new(&m);
        let mut rev = m.extremal().to_vec();
        rev.reverse();
        let r = m.with_extremal(rev).unwrap();
        match (sink_domains(&m, &p), sink_domains(&r, &p)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn stg_edges_follow_incidence(seed in any::<u64>()) {
        let m = random_model(&mut ChaCha8Rng::seed_from_u64(seed), 3, 2);
        let p = Partition::new(&m);
        for k in 0..m.extremal_count() {
            for e in build_stg(&m, &p, k).unwrap().edges {
                let (reg, sw) = if p.domain(e.from).is_regulatory() { (e.from, e.to) } else { (e.to, e.from) };
                prop_assert!(p.domain(reg).is_regulatory() && !p.domain(sw).is_regulatory());
                prop_assert!(p.adjacent_regulatory(sw).unwrap().contains(&reg));
            }
        }
    }

    #[test]
    fn flow_points_toward_focal_point(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 3, 2);
        let p = Partition::new(&m);
        let c = m.degradation();
        for _ in 0..20 {
            let x = random_point(&mut rng, &m);
            let Some(d) = p.locate(&x) else { continue };
            for k in 0..m.extremal_count() {
                let f = m.rate_in_domain(k, p.domain(d)).unwrap();
                for i in 0..m.n() {
                    let v = f[i] - c[i] * x[i];
                    let toward = f[i] / c[i] - x[i];
                    prop_assert!(v == 0.0 && toward == 0.0 || v.signum() == toward.signum());
                }
            }
        }
    }

    #[test]
    fn homogenization_cone_matches_closure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 3, 1);
        let p = Partition::new(&m);
        for d in p.regulatory() {
            let h = p.closure::<f64>(d.id());
            let g = homogenization_cone(&h, &1e-9).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = random_point(&mut rng, &m).into_iter().map(|v| v - 0.2 + 0.4 * rng.random::<f64>()).collect();
                let mut y = x.clone();
                y.push(1.0);
                let inside = h.contains(&x, &1e-9).unwrap();
                // Points within 1e-6 of the boundary are skipped.
                let margin = h.inequalities().map(|(a, b)| b - a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>()).fold(f64::INFINITY, f64::min);
                if margin.abs() < 1e-6 {
                    continue;
                }
                prop_assert_eq!(in_cone(g.columns(), &y, 1e-8), inside, "x = {:?}", x);
            }
        }
    }
}
