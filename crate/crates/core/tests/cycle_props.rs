use std::f64::consts::LN_2;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solenoid_kms::cycle::{
    combine_extremes, decompose_subinvariant, extreme_vector, extreme_vectors, measure_to_vector, resolvent_apply,
};
use solenoid_kms::measures::{
    decompose_into_extremes, extremality_probe, lebesgue, make_mr, CircleMeasure, ProbeVerdict,
};

const RATES: [f64; 4] = [0.1, 1.0, 2.0 * LN_2, 5.0];

fn simplex_point(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

#[test]
fn resolvent_of_extremes_is_scaled_basis() {
    for n in 0..=4u32 {
        for r in RATES {
            let k = 1usize << n;
            let gap = -(-r / k as f64).exp_m1();
            for (j, v) in extreme_vectors(n, r).unwrap().iter().enumerate() {
                let eps = resolvent_apply(v, n, r).unwrap();
                for (i, e) in eps.iter().enumerate() {
                    let expect = if i == j { gap } else { 0.0 };
                    assert!((e - expect).abs() <= 1e-14, "n={n} r={r} j={j} i={i}: {e}");
                }
            }
        }
    }
}

#[test]
fn extreme_vectors_are_normalized() {
    for n in 0..=14u32 {
        for r in RATES {
            let k = 1usize << n;
            for j in (0..k).step_by(1 + k / 8) {
                let v = extreme_vector(n, r, j).unwrap();
                let sum: f64 = v.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-13, "n={n} r={r}: {sum}");
                assert!(v.iter().all(|&x| x > 0.0));
            }
        }
    }
}

#[test]
fn lebesgue_vector_is_uniform() {
    assert_eq!(measure_to_vector(&lebesgue(), 2), vec![0.25; 4]);
}

proptest! {
    #[test]
    fn round_trip(seed in any::<u64>(), n in 0u32..7, ri in 0usize..4) {
        let r = RATES[ri];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = simplex_point(&mut rng, 1 << n);
        let x = combine_extremes(&lambda, n, r).unwrap();
        let back = decompose_subinvariant(&x, n, r).unwrap();
        for (a, b) in back.iter().zip(&lambda) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn subinvariant_measures_give_subinvariant_vectors(seed in any::<u64>(), n in 1u32..8, r in 0.1f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts = rng.gen_range(1..=4);
        let w = simplex_point(&mut rng, parts);
        let rotates: Vec<CircleMeasure> =
            (0..parts).map(|_| make_mr(r).unwrap().rotate(rng.gen_range(0.0..1.0))).collect();
        let m = CircleMeasure::convex_combination(&w, &rotates).unwrap();
        let x = measure_to_vector(&m, n);
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(decompose_subinvariant(&x, n, r).is_ok());
    }

    #[test]
    fn probe_and_decomposition_agree_on_mr(n in 1u32..9, r in 0.1f64..6.0) {
        let m = make_mr(r).unwrap();
        prop_assert_eq!(extremality_probe(&m, r, n, 1e-10).unwrap(), ProbeVerdict::ForcedEqual);
        let lambda = decompose_into_extremes(&m, r, n).unwrap();
        prop_assert!((lambda[0] - 1.0).abs() <= 1e-10);
        prop_assert!(lambda[1..].iter().all(|l| l.abs() <= 1e-10));
        let v0 = &extreme_vectors(n, r).unwrap()[0];
        for (a, b) in measure_to_vector(&m, n).iter().zip(v0) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
    }
}
