use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solenoid_kms::kms::make_theta_seq;
use solenoid_kms::toeplitz::{elem_adjoint, elem_mul, random_element, AlgebraLevel, ToeplitzElement};

fn level(n: u32, j: u32) -> AlgebraLevel {
    make_theta_seq(n, 0.123, 4, 1.0).unwrap().level(j).unwrap()
}

fn element(rng: &mut ChaCha8Rng, level: &AlgebraLevel) -> ToeplitzElement {
    let terms = rng.gen_range(1..=3);
    random_element(rng, *level, terms, 2, 2)
}

fn indices(x: &ToeplitzElement) -> BTreeSet<(u32, u32)> {
    x.terms().map(|(m, n, _)| (m, n)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn multiplication_is_associative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in [2, 3] {
            for j in 0..=3 {
                let l = level(n, j);
                let (x, y, z) = (element(&mut rng, &l), element(&mut rng, &l), element(&mut rng, &l));
                let left = elem_mul(&elem_mul(&x, &y).unwrap(), &z).unwrap();
                let right = elem_mul(&x, &elem_mul(&y, &z).unwrap()).unwrap();
                prop_assert!(left.max_coeff_diff(&right) <= 1e-12, "N={n} j={j}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn adjoint_reverses_products(seed in any::<u64>(), n in 2u32..4, j in 0u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = level(n, j);
        let (x, y) = (element(&mut rng, &l), element(&mut rng, &l));
        let lhs = elem_adjoint(&elem_mul(&x, &y).unwrap());
        let rhs = elem_mul(&elem_adjoint(&y), &elem_adjoint(&x)).unwrap();
        prop_assert_eq!(indices(&lhs), indices(&rhs));
        prop_assert!(lhs.max_coeff_diff(&rhs) <= 1e-12);
        prop_assert_eq!(elem_adjoint(&elem_adjoint(&x)), x);
    }

    #[test]
    fn dynamics_is_multiplicative_and_commutes_with_embedding(
        seed in any::<u64>(), n in 2u32..4, j in 0u32..4, t in -20.0f64..20.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = level(n, j);
        let (x, y) = (element(&mut rng, &l), element(&mut rng, &l));
        let lhs = x.mul(&y).unwrap().apply_dynamics(t);
        let rhs = x.apply_dynamics(t).mul(&y.apply_dynamics(t)).unwrap();
        prop_assert!(lhs.max_coeff_diff(&rhs) <= 1e-12);
        let up = x.embed().unwrap().apply_dynamics(t);
        let across = x.apply_dynamics(t).embed().unwrap();
        prop_assert!(up.max_coeff_diff(&across) <= 1e-12);
    }

    #[test]
    fn embedding_is_a_homomorphism(seed in any::<u64>(), n in 2u32..4, j in 0u32..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = level(n, j);
        let (x, y) = (element(&mut rng, &l), element(&mut rng, &l));
        let lhs = x.mul(&y).unwrap().embed().unwrap();
        let rhs = x.embed().unwrap().mul(&y.embed().unwrap()).unwrap();
        prop_assert!(lhs.max_coeff_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn printing_and_parsing_round_trip(seed in any::<u64>(), n in 2u32..4, j in 0u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = level(n, j);
        let x = element(&mut rng, &l);
        let back = ToeplitzElement::parse(&x.to_string(), l).unwrap();
        prop_assert_eq!(back, x);
    }
}

#[test]
fn isometry_relation() {
    for n in [2, 3] {
        for j in 0..=4 {
            let l = level(n, j);
            let one = ToeplitzElement::identity(l);
            let prod = elem_mul(&ToeplitzElement::s_adj(l), &ToeplitzElement::s(l)).unwrap();
            assert_eq!(prod, one);
        }
    }
}
