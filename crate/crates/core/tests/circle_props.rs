use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use solenoid_kms::circle::{
    base_n_digits, circle_distance, cover, dyadic_partition, from_base_n_digits, rotate, CirclePoint, TrigPoly,
};
use solenoid_kms::toeplitz::random_poly;

fn in_unit(p: CirclePoint) -> bool {
    (0.0..1.0).contains(&p.value())
}

fn poly(seed: u64, degree: i64) -> TrigPoly {
    random_poly(&mut ChaCha8Rng::seed_from_u64(seed), degree)
}

proptest! {
    #[test]
    fn operations_stay_on_the_circle(t in -5.0f64..5.0, gamma in -10.0f64..10.0, n in 2u32..8) {
        let p = CirclePoint::new(t);
        prop_assert!(in_unit(p));
        prop_assert!(in_unit(rotate(p, gamma)));
        prop_assert!(in_unit(cover(p, n).unwrap()));
        prop_assert!(in_unit(p.sub(CirclePoint::new(gamma))));
        prop_assert!(in_unit(CirclePoint::new(-1e-18)));
    }

    #[test]
    fn rotation_is_invertible_and_injective(
        ts in prop::collection::btree_set(0u32..1_000_000, 2..40),
        gamma in -3.0f64..3.0,
    ) {
        let pts: Vec<CirclePoint> = ts.iter().map(|&k| CirclePoint::new(f64::from(k) / 1e6)).collect();
        let moved: Vec<CirclePoint> = pts.iter().map(|&p| rotate(p, gamma)).collect();
        for (p, q) in pts.iter().zip(&moved) {
            prop_assert!(circle_distance(rotate(*q, -gamma).value(), p.value()) <= 1e-15);
        }
        for i in 0..moved.len() {
            for j in i + 1..moved.len() {
                let before = circle_distance(pts[i].value(), pts[j].value());
                let after = circle_distance(moved[i].value(), moved[j].value());
                prop_assert!(after > 0.0);
                prop_assert!((before - after).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cover_intertwines_rotations(gamma in -2.0f64..2.0, n in 2u32..6) {
        let nf = f64::from(n);
        for i in 0..10_000 {
            let t = CirclePoint::new(i as f64 / 10_000.0);
            let lhs = cover(rotate(t, gamma), n).unwrap();
            let rhs = rotate(cover(t, n).unwrap(), nf * gamma);
            prop_assert!(circle_distance(lhs.value(), rhs.value()) <= 1e-12, "t={} lhs={:?} rhs={:?}", t.value(), lhs, rhs);
        }
    }

    #[test]
    fn cover_composition_is_a_homomorphism(a in any::<u64>(), b in any::<u64>(), n in 2u32..5) {
        let (f, g) = (poly(a, 3), poly(b, 3));
        let lhs = f.mul(&g).compose_cover(n).unwrap();
        let rhs = f.compose_cover(n).unwrap().mul(&g.compose_cover(n).unwrap());
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(f.conj().compose_cover(n).unwrap(), f.compose_cover(n).unwrap().conj());
    }

    #[test]
    fn rotation_composition_is_a_homomorphism(a in any::<u64>(), b in any::<u64>(), gamma in -1.0f64..1.0) {
        let (f, g) = (poly(a, 4), poly(b, 4));
        let lhs = f.mul(&g).compose_rotation(gamma);
        let rhs = f.compose_rotation(gamma).mul(&g.compose_rotation(gamma));
        prop_assert!(lhs.max_coeff_diff(&rhs) <= 1e-12);
        prop_assert!(f.conj().compose_rotation(gamma).max_coeff_diff(&f.compose_rotation(gamma).conj()) <= 1e-14);
        let t = 0.3141;
        prop_assert!((f.compose_rotation(gamma).eval(t) - f.eval(t - gamma)).norm() <= 1e-12);
    }

    #[test]
    fn base_n_digits_round_trip(k in 0u32..4096, n in 2u32..5) {
        let scale = f64::from(n).powi(6);
        let t = f64::from(k % scale as u32) / scale;
        let digits = base_n_digits(CirclePoint::new(t), n, 6).unwrap();
        prop_assert!(digits.iter().all(|&d| d < n));
        let back = from_base_n_digits(&digits, n);
        if n.is_power_of_two() {
            prop_assert_eq!(back, t);
        } else {
            prop_assert!((back - t).abs() <= 1e-15);
        }
    }
}

#[test]
fn dyadic_partitions_tile_exactly() {
    for n in 0..=14 {
        let arcs = dyadic_partition(n);
        assert_eq!(arcs.len(), 1 << n);
        let total: f64 = arcs.iter().map(|a| a.length()).sum();
        assert_eq!(total, 1.0);
        for w in arcs.windows(2) {
            assert_eq!(w[0].end(), w[1].start().value());
        }
        assert_eq!(arcs[0].start().value(), 0.0);
        assert_eq!(arcs.last().unwrap().end(), 1.0);
    }
}
