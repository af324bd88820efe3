mod common;

use common::{random_mdp, random_policy};
use nalgebra::DMatrix;
use proptest::prelude::*;
use qpi_sim::blockenc::{
    build_oracle_pair, combine_encodings, compute_cp, policy_transition_encoding, reconstruct_block, BlockEncoding,
    Combination, ENCODING_TOL,
};
use qpi_sim::mdp::build_policy_transition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oracle_pairs_are_isometries(seed in any::<u64>(), m in 1usize..6, n in 1usize..6, p in prop::sample::select(vec![0.0, 0.5, 1.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() });
        prop_assume!(a.amax() > 0.0);
        let pair = build_oracle_pair(&a, p, None, None).unwrap();
        prop_assert!(pair.isometry_error() <= ENCODING_TOL);
        prop_assert!(reconstruct_block(&pair, &a).unwrap().reconstruction_error <= ENCODING_TOL);
    }

    #[test]
    fn policy_transition_normalization_is_policy_free(seed in any::<u64>(), s in 1usize..6, a in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, s, a, 0.9);
        let expected = compute_cp(&mdp).sqrt();
        for _ in 0..3 {
            let pol = random_policy(&mut rng, s, a);
            let enc = policy_transition_encoding(&mdp, &pol).unwrap();
            let report = enc.report(&build_policy_transition(&mdp, &pol).unwrap().matrix).unwrap();
            prop_assert!((report.mu - expected).abs() <= 1e-9);
            prop_assert!(report.reconstruction_error <= ENCODING_TOL);
        }
    }

    #[test]
    fn combination_normalizations(mu1 in 0.1f64..10.0, mu2 in 0.1f64..10.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
        let a = BlockEncoding { mu: mu1, block: DMatrix::identity(3, 3) / mu1 };
        let b = BlockEncoding { mu: mu2, block: DMatrix::identity(3, 3) * 2.0 / mu2 };
        let prod = combine_encodings(&[a.clone(), b.clone()], &Combination::Product).unwrap();
        prop_assert!((prod.mu - mu1 * mu2).abs() <= 1e-12 * mu1 * mu2);
        prop_assume!(c1.abs() + c2.abs() > 1e-3);
        let lc = combine_encodings(&[a, b], &Combination::LinearCombination(vec![c1, c2])).unwrap();
        let expected = c1.abs() * mu1 + c2.abs() * mu2;
        prop_assert!((lc.mu - expected).abs() <= 1e-12 * expected);
        let target = DMatrix::identity(3, 3) * (c1 + 2.0 * c2);
        prop_assert!((lc.matrix() - target).amax() <= 1e-12 * expected);
    }
}
