use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solenoid_kms::campaign::perturbed_lebesgue;
use solenoid_kms::circle::{dyadic_partition, TrigPoly};
use solenoid_kms::measures::{
    check_subinvariance, decompose_into_extremes, extreme_combination, lebesgue, make_mnr, make_mr, CircleMeasure,
    SUBINVARIANCE_TOL,
};
use solenoid_kms::toeplitz::random_poly;

/// A convex combination of up to five rotates of `m_r`.
fn random_subinvariant(rng: &mut ChaCha8Rng, r: f64) -> CircleMeasure {
    let parts = rng.gen_range(1..=5);
    let raw: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..parts - 1].iter().sum();
    weights[parts - 1] = 1.0 - head;
    let base = make_mr(r).unwrap();
    let rotates: Vec<CircleMeasure> = (0..parts).map(|_| base.rotate(rng.gen_range(0.0..1.0))).collect();
    CircleMeasure::convex_combination(&weights, &rotates).unwrap()
}

fn breakpoint_midpoints(m: &CircleMeasure) -> Vec<f64> {
    let mut b = m.breakpoints();
    b.push(1.0);
    b.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect()
}

fn assert_probability(m: &CircleMeasure) -> Result<(), TestCaseError> {
    prop_assert!((m.total_mass() - 1.0).abs() <= 1e-12, "mass {}", m.total_mass());
    for t in breakpoint_midpoints(m) {
        prop_assert!(m.density(t) >= 0.0);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constructed_measures_are_probabilities(seed in any::<u64>(), r in 0.01f64..40.0, n in 2u32..4, level in 1u32..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_subinvariant(&mut rng, r);
        assert_probability(&m)?;
        assert_probability(&m.pushforward(n).unwrap())?;
        assert_probability(&m.reflect())?;
        assert_probability(&make_mr(r).unwrap().rotate(rng.gen_range(-3.0..3.0)))?;
        assert_probability(&make_mnr(level, r).unwrap())?;
    }

    #[test]
    fn pushforward_duality(seed in any::<u64>(), r in 0.1f64..10.0, n in 2u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_subinvariant(&mut rng, r);
        let f = random_poly(&mut rng, 4);
        let lhs = m.pushforward(n).unwrap().integrate_trig(&f);
        let rhs = m.integrate_trig(&f.compose_cover(n).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn rotation_duality(seed in any::<u64>(), r in 0.1f64..10.0, s in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_subinvariant(&mut rng, r);
        let f = random_poly(&mut rng, 4);
        let lhs = m.rotate(s).integrate_trig(&f);
        let rhs = m.integrate_trig(&f.compose_rotation(-s));
        prop_assert!((lhs - rhs).norm() <= 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn decomposition_recovers_arc_masses(seed in any::<u64>(), r in 0.1f64..6.0, n in 1u32..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_subinvariant(&mut rng, r);
        let lambda = decompose_into_extremes(&m, r, n).unwrap();
        prop_assert!(lambda.iter().all(|&l| l >= 0.0));
        prop_assert!((lambda.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let rebuilt = extreme_combination(&lambda, r, n).unwrap();
        for u in dyadic_partition(n) {
            prop_assert!((rebuilt.measure_arc(&u) - m.measure_arc(&u)).abs() <= 1e-10);
        }
    }

    #[test]
    fn extreme_combinations_converge_weakly(seed in any::<u64>(), r in 0.1f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_subinvariant(&mut rng, r);
        let f: TrigPoly = random_poly(&mut rng, 8);
        let target = m.integrate_trig(&f);
        let err = |n: u32| {
            let lambda = decompose_into_extremes(&m, r, n).unwrap();
            (extreme_combination(&lambda, r, n).unwrap().integrate_trig(&f) - target).norm()
        };
        let errs: Vec<f64> = [4, 8, 12].iter().map(|&n| err(n)).collect();
        prop_assert!(errs[2] <= 1e-2, "{errs:?}");
        prop_assert!(errs[1] <= errs[0] && errs[2] <= errs[1], "{errs:?}");
    }

    #[test]
    fn only_lebesgue_is_invariant(seed in any::<u64>(), index in 0u64..1000) {
        let m = perturbed_lebesgue(seed, index);
        let rep = check_subinvariance(&m, 0.0, (64, 32), SUBINVARIANCE_TOL).unwrap();
        prop_assert!(!rep.satisfied);
        prop_assert!(rep.witness.is_some());
    }
}

#[test]
fn lebesgue_passes_at_rate_zero_exactly() {
    let rep = check_subinvariance(&lebesgue(), 0.0, (128, 64), SUBINVARIANCE_TOL).unwrap();
    assert!(rep.satisfied);
    assert_eq!(rep.worst_violation, 0.0);
}
