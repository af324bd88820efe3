mod common;

use common::{acute_pair, normalized_distance_bound};
use nalgebra::DMatrix;
use proptest::prelude::*;
use qpi_sim::quantum::{
    measure_state, normalized_solution, shots_for, sign_resolution, simulate_solver_state, tomography_estimate,
    ExactState,
    NoiseModel,
};
use qpi_sim::SystemKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_system<R: Rng>(rng: &mut R, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    // diagonally dominant so the solve is always defined
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    for i in 0..n {
        a[(i, i)] += n as f64 * rng.random_range(1.0..2.0);
    }
    (a, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn solver_output_within_epsilon(seed in any::<u64>(), n in 1usize..12, eps in 1e-6f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = random_system(&mut rng, n);
        let exact = normalized_solution(&a, &b, SystemKind::Generic).unwrap();
        let noisy = simulate_solver_state(&a, &b, eps, SystemKind::Generic, &mut rng).unwrap();
        prop_assert!(l2(&exact, &noisy) <= eps + 1e-12);
        prop_assert!((l2(&noisy, &vec![0.0; n]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_distance_bound_on_acute_pairs(seed in any::<u64>(), dim in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, eps) = acute_pair(&mut rng, dim);
        let (d, bound) = normalized_distance_bound(&x, &y, eps);
        prop_assert!(d <= bound * (1.0 + 1e-12), "{d} > {bound}");
    }

    #[test]
    fn amplitude_estimates_are_unit_norm(seed in any::<u64>(), n in 1usize..10, shots in 1u64..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = l2(&raw, &vec![0.0; n]);
        prop_assume!(norm > 1e-6);
        let x: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let est = tomography_estimate(&ExactState(x), shots, true, 0.05, &mut rng).unwrap();
        prop_assert_eq!(est.histogram.total(), shots);
        prop_assert!((l2(&est.values, &vec![0.0; n]) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn frequencies_converge_with_shots() {
    let x = [0.6, -0.48, 0.64];
    let probs: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tv: Vec<f64> = [100u64, 10_000, 1_000_000]
        .iter()
        .map(|&m| {
            let hist = measure_state(&x, m, &mut rng).unwrap();
            0.5 * hist.frequencies().iter().zip(&probs).map(|(f, p)| (f - p).abs()).sum::<f64>()
        })
        .collect();
    assert!(tv[0] > tv[1] && tv[1] > tv[2], "{tv:?}");
}

#[test]
fn noise_model_is_reproducible() {
    let (a, b) = random_system(&mut ChaCha8Rng::seed_from_u64(3), 6);
    let draw = || {
        let model = NoiseModel::new(0.05, 1000, 42).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        simulate_solver_state(&a, &b, model.epsilon, SystemKind::Generic, &mut rng).unwrap()
    };
    assert_eq!(draw(), draw());
}

#[test]
fn tomography_meets_its_contract_with_formula_shots() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let eps = 0.05;
    let n = 16;
    let shots = shots_for(n, eps).unwrap();
    let mut ok = 0;
    for _ in 0..50 {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = l2(&raw, &vec![0.0; n]);
        let x: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let est = tomography_estimate(&ExactState(x.clone()), shots, true, sign_resolution(eps), &mut rng).unwrap();
        let err = est.values.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ok += (err <= eps) as usize;
    }
    assert!(ok >= 48, "{ok}/50");
}
