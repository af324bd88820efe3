//! Simulated quantum subroutines, replaced by their output guarantees.
//!
//! * The linear-system solver returns a unit vector within `ε` (ℓ2) of the
//!   normalized exact solution.
//! * Measuring a unit vector samples outcome `i` with probability `x_i²`.
//! * ℓ∞ tomography reconstructs `√(count/M)` magnitudes, optionally with
//!   signs that are only resolved above the precision `ε`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result, SystemKind};
use crate::mdp::l2_norm;

/// Precision and shot budget of the simulated quantum routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// ℓ2 precision of every solver output.
    pub epsilon: f64,
    /// Measurements per histogram.
    pub shots: u64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(epsilon: f64, shots: u64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 1)")));
        }
        if shots == 0 {
            return Err(Error::InvalidArgument("shot count must be at least 1".into()));
        }
        Ok(Self { epsilon, shots, seed })
    }
}

/// Shots for ℓ∞ tomography of an `n`-dimensional unit vector: `⌈36 ln n / ε²⌉`.
/// The logarithm is natural.
pub fn shots_for(n: usize, epsilon: f64) -> Result<u64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 1)")));
    }
    Ok(shots_formula(n as f64, epsilon))
}

/// `⌈36 ln n / ε²⌉` for real `n`, without range checks.
pub fn shots_formula(n: f64, epsilon: f64) -> u64 {
    (36.0 * n.ln() / (epsilon * epsilon)).ceil() as u64
}

pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let n = l2_norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

/// Dense solve of `A x = b`, normalized.
pub fn normalized_solution(a: &DMatrix<f64>, b: &[f64], kind: SystemKind) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "linear system",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let x = a
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .ok_or(Error::Singular(kind))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(kind));
    }
    normalize(x.as_slice()).ok_or_else(|| {
        Error::InvalidArgument(format!("{kind} system has a zero solution (b = 0?)"))
    })
}

/// Uniform random unit vector orthogonal to the unit vector `x`.
fn random_tangent<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Option<Vec<f64>> {
    for _ in 0..16 {
        let mut g: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let along: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi -= along * xi;
        }
        if let Some(t) = normalize(&g) {
            return Some(t);
        }
    }
    None
}

/// Moves the unit vector `x` along a uniformly random tangent direction so
/// that the result is a unit vector at ℓ2 distance exactly `u·ε` from `x`,
/// with `u ~ U[0, 1]`.
pub fn perturb_unit<R: Rng + ?Sized>(x: &[f64], epsilon: f64, rng: &mut R) -> Vec<f64> {
    let distance = rng.random::<f64>() * epsilon;
    perturb_unit_by(x, distance, rng)
}

/// Rotates `x` by the angle whose chord length is `distance`.
pub fn perturb_unit_by<R: Rng + ?Sized>(x: &[f64], distance: f64, rng: &mut R) -> Vec<f64> {
    let Some(t) = random_tangent(x, rng) else {
        return x.to_vec();
    };
    // chord 2 sin(φ/2) = distance
    let phi = 2.0 * (distance / 2.0).min(1.0).asin();
    let (s, c) = phi.sin_cos();
    x.iter().zip(&t).map(|(xi, ti)| c * xi + s * ti).collect()
}

/// `E[x̂_i²]` over the solver perturbation of [`perturb_unit`]. Measuring a
/// freshly perturbed state on every shot is exactly a multinomial draw over
/// these probabilities.
pub fn perturbed_outcome_probabilities(x: &[f64], epsilon: f64) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![1.0; n];
    }
    // sin²φ = d²(1 - d²/4) with d = uε, averaged over u ∈ [0, 1]
    let e2 = epsilon * epsilon;
    let mean_sin2 = e2 / 3.0 - e2 * e2 / 20.0;
    let spread = mean_sin2 / (n as f64 - 1.0);
    x.iter()
        .map(|xi| {
            let x2 = xi * xi;
            (1.0 - mean_sin2) * x2 + spread * (1.0 - x2)
        })
        .collect()
}

/// Solver output for `A x = b` under the ε-accurate noise model.
pub fn simulate_solver_state<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    b: &[f64],
    epsilon: f64,
    kind: SystemKind,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let exact = normalized_solution(a, b, kind)?;
    Ok(perturb_unit(&exact, epsilon, rng))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementHistogram {
    pub counts: Vec<u64>,
}

impl MeasurementHistogram {
    pub fn zeros(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `√(count_i / total)`.
    pub fn amplitudes(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&c| (c as f64 / total as f64).sqrt())
            .collect()
    }

    /// Empirical outcome frequencies.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

/// Multinomial draw of `shots` outcomes with the given probabilities
/// (renormalized to sum to one).
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    counts
}

/// Draws a single outcome index with probability proportional to `x_i²`.
pub fn sample_outcome<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> usize {
    let total: f64 = x.iter().map(|v| v * v).sum();
    let mut target = rng.random::<f64>() * total;
    for (i, v) in x.iter().enumerate() {
        target -= v * v;
        if target < 0.0 {
            return i;
        }
    }
    x.iter().rposition(|v| *v != 0.0).unwrap_or(0)
}

/// `shots` computational-basis measurements of a unit vector.
pub fn measure_state<R: Rng + ?Sized>(
    amplitudes: &[f64],
    shots: u64,
    rng: &mut R,
) -> Result<MeasurementHistogram> {
    let norm = l2_norm(amplitudes);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
    }
    let probs: Vec<f64> = amplitudes.iter().map(|a| a * a).collect();
    Ok(MeasurementHistogram {
        counts: sample_multinomial(&probs, shots, rng),
    })
}

/// A procedure that prepares (a noisy copy of) one fixed unit vector.
pub trait StatePreparation {
    fn dim(&self) -> usize;

    /// The noise-free vector being prepared.
    fn reference(&self) -> &[f64];

    /// One fresh preparation.
    fn prepare(&self, rng: &mut dyn rand::RngCore) -> Vec<f64>;

    /// Measures one fresh preparation.
    fn sample(&self, rng: &mut dyn rand::RngCore) -> usize {
        let state = self.prepare(rng);
        sample_outcome(&state, rng)
    }
}

/// Noise-free preparation.
#[derive(Debug, Clone)]
pub struct ExactState(pub Vec<f64>);

impl StatePreparation for ExactState {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn reference(&self) -> &[f64] {
        &self.0
    }

    fn prepare(&self, _rng: &mut dyn rand::RngCore) -> Vec<f64> {
        self.0.clone()
    }
}

/// Solver output: every preparation carries independent ε-bounded noise.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub exact: Vec<f64>,
    pub epsilon: f64,
}

impl StatePreparation for SolverState {
    fn dim(&self) -> usize {
        self.exact.len()
    }

    fn reference(&self) -> &[f64] {
        &self.exact
    }

    fn prepare(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        perturb_unit(&self.exact, self.epsilon, rng)
    }
}

/// Signed unit vector reconstructed from measurement counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeEstimate {
    pub values: Vec<f64>,
    pub histogram: MeasurementHistogram,
}

/// Smallest magnitude whose sign ε-accurate tomography must get right: a
/// flipped sign on `|x| ≤ ε/2` costs at most ε.
pub fn sign_resolution(epsilon: f64) -> f64 {
    epsilon / 2.0
}

/// ℓ∞ tomography: `shots` measurements of fresh preparations, magnitudes
/// `√(count/M)`. With `signed`, components whose reference magnitude exceeds
/// `sign_resolution` get their true sign and the rest a uniformly random one.
pub fn tomography_estimate<P, R>(
    source: &P,
    shots: u64,
    signed: bool,
    sign_resolution: f64,
    rng: &mut R,
) -> Result<AmplitudeEstimate>
where
    P: StatePreparation + ?Sized,
    R: Rng,
{
    if shots == 0 {
        return Err(Error::InvalidArgument("tomography needs at least one shot".into()));
    }
    let mut histogram = MeasurementHistogram::zeros(source.dim());
    for _ in 0..shots {
        histogram.counts[source.sample(rng)] += 1;
    }
    let mut values = histogram.amplitudes();
    if signed {
        for (v, r) in values.iter_mut().zip(source.reference()) {
            let positive = if r.abs() > sign_resolution {
                *r > 0.0
            } else {
                rng.random::<bool>()
            };
            if !positive {
                *v = -*v;
            }
        }
    }
    Ok(AmplitudeEstimate { values, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn shot_formula_examples() {
        assert_eq!(shots_formula(std::f64::consts::E.powi(2), 1.0), 72);
        // 36 · ln 64 · 10⁴ = 1_497_197.91…
        assert_eq!(shots_for(64, 1e-2).unwrap(), 1_497_198);
        let expected = (36.0 * 256f64.ln() * 1e4).ceil() as u64;
        assert_eq!(shots_for(256, 1e-2).unwrap(), expected);
        assert!(shots_for(1, 0.1).is_err());
        assert!(shots_for(4, 1.0).is_err());
    }

    #[test]
    fn identity_solve_stays_near_rhs() {
        let a = DMatrix::identity(3, 3);
        let b = [3.0, 0.0, 4.0];
        let x = simulate_solver_state(&a, &b, 0.05, SystemKind::Generic, &mut rng(1)).unwrap();
        assert!(dist(&x, &[0.6, 0.0, 0.8]) <= 0.05);
        assert!((l2_norm(&x) - 1.0).abs() < 1e-12);
        let tiny = simulate_solver_state(&a, &b, 1e-12, SystemKind::Generic, &mut rng(2)).unwrap();
        assert!(dist(&tiny, &[0.6, 0.0, 0.8]) <= 1e-12);
    }

    #[test]
    fn singular_system_names_its_kind() {
        let a = DMatrix::zeros(2, 2);
        let err = simulate_solver_state(&a, &[1.0, 0.0], 0.1, SystemKind::Weights, &mut rng(0))
            .unwrap_err();
        assert!(matches!(err, Error::Singular(SystemKind::Weights)));
    }

    #[test]
    fn measuring_basis_state() {
        let h = measure_state(&[1.0, 0.0, 0.0], 1000, &mut rng(3)).unwrap();
        assert_eq!(h.counts, vec![1000, 0, 0]);
        let h = measure_state(&[0.5; 4], 1, &mut rng(3)).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts.iter().filter(|c| **c == 1).count(), 1);
        assert!(measure_state(&[0.5, 0.5], 10, &mut rng(3)).is_err());
    }

    #[test]
    fn uniform_counts_within_five_sigma() {
        // binomial(10000, 1/4): σ = √(10000·¼·¾) ≈ 43.3
        let h = measure_state(&[0.5; 4], 10_000, &mut rng(4)).unwrap();
        let sigma = (10_000.0f64 * 0.25 * 0.75).sqrt();
        for c in h.counts {
            assert!((c as f64 - 2500.0).abs() <= 5.0 * sigma, "{c}");
        }
    }

    #[test]
    fn one_hot_tomography() {
        let est = tomography_estimate(&ExactState(vec![0.0, 1.0, 0.0]), 500, true, 0.01, &mut rng(5))
            .unwrap();
        assert_eq!(est.values[1], 1.0);
        assert_eq!(est.values[0].abs(), 0.0);
        assert_eq!(est.values[2].abs(), 0.0);
    }

    #[test]
    fn signed_tomography_recovers_large_signs() {
        let x = normalize(&[0.6, -0.5, 0.3, -0.4, 0.001]).unwrap();
        let est = tomography_estimate(&ExactState(x.clone()), 200_000, true, 0.01, &mut rng(6))
            .unwrap();
        for (e, r) in est.values.iter().zip(&x) {
            if r.abs() > 0.01 {
                assert_eq!(e.signum(), r.signum());
            }
        }
        assert!((l2_norm(&est.values) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_probabilities_match_per_shot_frequencies() {
        let x = normalize(&[0.9, 0.3, 0.2, 0.05, 0.0]).unwrap();
        let eps = 0.3;
        let probs = perturbed_outcome_probabilities(&x, eps);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let src = SolverState { exact: x.clone(), epsilon: eps };
        let mut r = rng(7);
        let shots = 400_000;
        let mut counts = vec![0u64; x.len()];
        for _ in 0..shots {
            counts[src.sample(&mut r)] += 1;
        }
        for (c, p) in counts.iter().zip(&probs) {
            let freq = *c as f64 / shots as f64;
            let sigma = (p * (1.0 - p) / shots as f64).sqrt().max(1e-6);
            assert!((freq - p).abs() < 5.0 * sigma, "freq {freq} vs p {p}");
        }
    }

    #[test]
    fn multinomial_conserves_total() {
        let counts = sample_multinomial(&[0.1, 0.0, 0.6, 0.3], 12345, &mut rng(8));
        assert_eq!(counts.iter().sum::<u64>(), 12345);
        assert_eq!(counts[1], 0);
    }
}
