//! Exact quantum policy iteration with a simulated evaluation step.
//!
//! Each iteration prepares the value state `|Q^π⟩` through the noisy solver,
//! measures it `M` times over `(s, a)` outcomes and picks the most frequent
//! action per state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, SystemKind};
use crate::mdp::{
    argmax_lowest, build_policy_transition, distance_metrics, solve_exact_q, value_iteration, Mdp,
    Policy, QValues, VALUE_ITERATION_TOL,
};
use crate::quantum::{
    normalize, perturb_unit, perturbed_outcome_probabilities, sample_multinomial, sample_outcome,
    shots_for, MeasurementHistogram, NoiseModel,
};

/// Sup-norm distance to `Q*` below which a policy counts as optimal.
pub const OPTIMALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    /// `shots_for(S·A, ε)`.
    Auto,
    Fixed(u64),
}

/// How the `M` evaluate-then-measure rounds are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// One multinomial draw over the solver-noise mixture; identical in
    /// distribution to per-shot sampling.
    Mixture,
    /// A fresh noisy state for every shot.
    PerShot,
}

#[derive(Debug, Clone)]
pub struct QpiConfig {
    pub epsilon: f64,
    pub shots: Shots,
    pub max_iterations: usize,
    pub seed: u64,
    /// Stop once the improved policy equals the evaluated one.
    pub early_stop: bool,
    pub sampling: Sampling,
    /// Starting policy; uniform random when `None`.
    pub initial: Option<Policy>,
}

impl QpiConfig {
    pub fn new(epsilon: f64, max_iterations: usize, seed: u64) -> Self {
        Self {
            epsilon,
            shots: Shots::Auto,
            max_iterations,
            seed,
            early_stop: false,
            sampling: Sampling::Mixture,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        NoiseModel::new(self.epsilon, 1, self.seed).map(|_| ())
    }

    pub fn resolve_shots(&self, num_pairs: usize) -> Result<u64> {
        match self.shots {
            Shots::Auto => shots_for(num_pairs, self.epsilon),
            Shots::Fixed(0) => Err(Error::InvalidArgument("shot count must be at least 1".into())),
            Shots::Fixed(m) => Ok(m),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Policy evaluated in this iteration.
    pub policy: Policy,
    pub histogram: MeasurementHistogram,
    /// One solver output for the evaluated policy.
    pub q_hat: Vec<f64>,
    /// `√(count/M)`, the value state as seen through the measurements.
    pub q_from_counts: Vec<f64>,
    /// Normalized exact `Q^π` of the evaluated policy.
    pub q_exact: Vec<f64>,
    /// `‖q_from_counts − |q_exact|‖∞`.
    pub tomography_error: f64,
    /// `‖|Q*⟩ − |Q^π⟩‖_ρ` for the evaluated policy.
    pub rho_gap: f64,
    /// Improved policy.
    pub next_policy: Policy,
    /// `‖Q^{π'} − Q*‖∞` for the improved policy.
    pub next_sup_gap: f64,
}

#[derive(Debug, Clone)]
pub struct QpiTrace {
    pub records: Vec<IterationRecord>,
    pub shots: u64,
    pub q_star: QValues,
    pub discount: f64,
    pub stopped_early: bool,
}

impl QpiTrace {
    pub fn final_policy(&self) -> Option<&Policy> {
        self.records.last().map(|r| &r.next_policy)
    }

    /// First iteration whose improved policy is optimal.
    pub fn convergence_iteration(&self) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.next_sup_gap <= OPTIMALITY_TOL)
            .map(|r| r.iteration)
    }

    pub fn final_sup_gap(&self) -> Option<f64> {
        self.records.last().map(|r| r.next_sup_gap)
    }
}

/// One noisy solver output for `(I − γP^π) q = R`.
pub fn qpi_evaluate<R: rand::Rng + ?Sized>(
    mdp: &Mdp,
    policy: &Policy,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let exact = normalized_q(mdp, policy)?;
    Ok(perturb_unit(&exact, noise.epsilon, rng))
}

fn normalized_q(mdp: &Mdp, policy: &Policy) -> Result<Vec<f64>> {
    let q = solve_exact_q(mdp, policy)?;
    normalize(q.values()).ok_or_else(|| {
        Error::InvalidArgument(format!("{} system has a zero solution", SystemKind::Evaluation))
    })
}

/// Per-state argmax of counts, ties to the lowest action. States without any
/// count keep the action of `previous`.
pub fn qpi_improve(
    histogram: &MeasurementHistogram,
    num_states: usize,
    num_actions: usize,
    previous: &Policy,
) -> Result<Policy> {
    if histogram.len() != num_states * num_actions {
        return Err(Error::DimensionMismatch {
            what: "histogram length",
            expected: num_states * num_actions,
            got: histogram.len(),
        });
    }
    let actions = (0..num_states)
        .map(|s| {
            let row = &histogram.counts[s * num_actions..(s + 1) * num_actions];
            if row.iter().all(|c| *c == 0) {
                previous.action(s)
            } else {
                let as_f: Vec<f64> = row.iter().map(|c| *c as f64).collect();
                argmax_lowest(&as_f)
            }
        })
        .collect();
    Ok(Policy::Deterministic(actions))
}

fn measure_evaluation(
    exact: &[f64],
    epsilon: f64,
    shots: u64,
    sampling: Sampling,
    rng: &mut ChaCha8Rng,
) -> MeasurementHistogram {
    match sampling {
        Sampling::Mixture => {
            let probs = perturbed_outcome_probabilities(exact, epsilon);
            MeasurementHistogram {
                counts: sample_multinomial(&probs, shots, rng),
            }
        }
        Sampling::PerShot => {
            let mut hist = MeasurementHistogram::zeros(exact.len());
            for _ in 0..shots {
                let state = perturb_unit(exact, epsilon, rng);
                hist.counts[sample_outcome(&state, rng)] += 1;
            }
            hist
        }
    }
}

pub fn run_qpi(mdp: &Mdp, config: &QpiConfig) -> Result<QpiTrace> {
    config.validate()?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let shots = config.resolve_shots(mdp.num_pairs())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (q_star, _) = value_iteration(mdp, VALUE_ITERATION_TOL)?;
    let q_star_unit = q_star.normalized();

    let mut policy = config.initial.clone().unwrap_or_else(|| Policy::uniform(ns, na));
    build_policy_transition(mdp, &policy)?;
    let mut records = Vec::new();
    let mut stopped_early = false;
    for iteration in 1..=config.max_iterations {
        let exact = normalized_q(mdp, &policy)?;
        let q_hat = perturb_unit(&exact, config.epsilon, &mut rng);
        let histogram = measure_evaluation(&exact, config.epsilon, shots, config.sampling, &mut rng);
        let q_from_counts = histogram.amplitudes();
        let magnitudes: Vec<f64> = exact.iter().map(|v| v.abs()).collect();
        let tomography_error = distance_metrics(&q_from_counts, &magnitudes)?.sup;
        let rho_gap = distance_metrics(&q_star_unit, &exact)?.rho;

        let next_policy = qpi_improve(&histogram, ns, na, &policy)?;
        let next_q = solve_exact_q(mdp, &next_policy)?;
        let next_sup_gap = distance_metrics(next_q.values(), q_star.values())?.sup;
        let repeated = next_policy.same_as(&policy, na);
        records.push(IterationRecord {
            iteration,
            policy: std::mem::replace(&mut policy, next_policy.clone()),
            histogram,
            q_hat,
            q_from_counts,
            q_exact: exact,
            tomography_error,
            rho_gap,
            next_policy,
            next_sup_gap,
        });
        if config.early_stop && repeated {
            stopped_early = iteration < config.max_iterations;
            break;
        }
    }
    Ok(QpiTrace {
        records,
        shots,
        q_star,
        discount: mdp.discount(),
        stopped_early,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub tail: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `rhs ≥ 2/√(S·A)`: the bound cannot fail since the left side never
    /// exceeds that value.
    pub vacuous: bool,
}

/// Suboptimality bound over the last `tail` iterations:
/// `max ‖|Q*⟩ − |Q^{π_t}⟩‖_ρ ≤ 2√2 γ Γ² max ‖q̂^{π_t} − q^{π_t}‖∞`.
pub fn check_suboptimality_bound(trace: &QpiTrace, tail: usize) -> Result<BoundCheck> {
    let len = trace.records.len();
    if tail == 0 || tail > len {
        return Err(Error::InvalidArgument(format!(
            "tail {tail} outside 1..={len} recorded iterations"
        )));
    }
    let window = &trace.records[len - tail..];
    let lhs = window.iter().map(|r| r.rho_gap).fold(0.0, f64::max);
    let err = window.iter().map(|r| r.tomography_error).fold(0.0, f64::max);
    let gamma = trace.discount;
    let horizon = 1.0 / (1.0 - gamma);
    let rhs = 2.0 * std::f64::consts::SQRT_2 * gamma * horizon * horizon * err;
    let n = trace.q_star.len() as f64;
    Ok(BoundCheck {
        tail,
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
        vacuous: rhs >= 2.0 / n.sqrt(),
    })
}

/// [`check_suboptimality_bound`] for every tail length.
pub fn check_suboptimality_bounds(trace: &QpiTrace) -> Result<Vec<BoundCheck>> {
    (1..=trace.records.len()).map(|t| check_suboptimality_bound(trace, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::frozenlake::{frozenlake_to_mdp, parse_map, MAP_4X4};

    fn lake() -> Mdp {
        frozenlake_to_mdp(&parse_map(MAP_4X4).unwrap(), 0.9).unwrap()
    }

    #[test]
    fn vanishing_noise_evaluation() {
        let mdp = lake();
        let pol = Policy::uniform(16, 4);
        let noise = NoiseModel::new(1e-12, 1, 0).unwrap();
        let q = qpi_evaluate(&mdp, &pol, &noise, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let exact = solve_exact_q(&mdp, &pol).unwrap().normalized();
        assert!(distance_metrics(&q, &exact).unwrap().sup < 1e-10);
    }

    #[test]
    fn evaluation_within_epsilon() {
        let mdp = lake();
        let pol = Policy::uniform(16, 4);
        let noise = NoiseModel::new(1e-2, 1, 0).unwrap();
        let exact = solve_exact_q(&mdp, &pol).unwrap().normalized();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let q = qpi_evaluate(&mdp, &pol, &noise, &mut rng).unwrap();
            assert!(distance_metrics(&q, &exact).unwrap().l2 <= 1e-2 + 1e-15);
        }
    }

    #[test]
    fn myopic_evaluation_is_reward_direction() {
        let mdp = lake().with_discount(0.0).unwrap();
        let pol = Policy::uniform(16, 4);
        let noise = NoiseModel::new(1e-2, 1, 0).unwrap();
        let q = qpi_evaluate(&mdp, &pol, &noise, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let r = normalize(mdp.rewards()).unwrap();
        assert!(distance_metrics(&q, &r).unwrap().l2 <= 1e-2);
    }

    #[test]
    fn improvement_rules() {
        let prev = Policy::Deterministic(vec![3, 2]);
        let hist = MeasurementHistogram {
            counts: vec![0, 5, 1, 0, 0, 0, 0, 0],
        };
        let pol = qpi_improve(&hist, 2, 4, &prev).unwrap();
        assert_eq!(pol, Policy::Deterministic(vec![1, 2]));
        let tie = MeasurementHistogram {
            counts: vec![4, 4, 0, 0, 0, 1, 1, 0],
        };
        assert_eq!(qpi_improve(&tie, 2, 4, &prev).unwrap(), Policy::Deterministic(vec![0, 1]));
        assert!(qpi_improve(&tie, 3, 4, &prev).is_err());
    }

    #[test]
    fn large_shot_improvement_matches_greedy_q_star() {
        let mdp = lake();
        let (q_star, greedy) = value_iteration(&mdp, VALUE_ITERATION_TOL).unwrap();
        let probs: Vec<f64> = q_star.normalized().iter().map(|v| v * v).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hist = MeasurementHistogram {
            counts: sample_multinomial(&probs, 10_000_000, &mut rng),
        };
        let pol = qpi_improve(&hist, 16, 4, &Policy::uniform(16, 4)).unwrap();
        for s in 0..16 {
            let row = q_star.state_row(s);
            let best = row.iter().cloned().fold(f64::MIN, f64::max);
            let unique = row.iter().filter(|v| **v >= best - 1e-9).count() == 1;
            if unique && best > 1e-3 {
                assert_eq!(pol.action(s), greedy.action(s), "state {s}");
            }
        }
    }

    #[test]
    fn single_iteration() {
        let mdp = lake();
        let trace = run_qpi(&mdp, &QpiConfig::new(1e-2, 1, 7)).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.shots, shots_for(64, 1e-2).unwrap());
        for r in &trace.records {
            assert!((crate::mdp::l2_norm(&r.q_hat) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mdp = lake();
        let mut config = QpiConfig::new(1e-2, 3, 42);
        config.shots = Shots::Fixed(20_000);
        let a = run_qpi(&mdp, &config).unwrap();
        let b = run_qpi(&mdp, &config).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.histogram, y.histogram);
            assert_eq!(x.q_hat, y.q_hat);
        }
    }

    #[test]
    fn converged_trace_has_zero_lhs() {
        let mdp = lake();
        let mut config = QpiConfig::new(1e-2, 4, 2);
        config.early_stop = true;
        let trace = run_qpi(&mdp, &config).unwrap();
        assert!(trace.convergence_iteration().is_some());
        let last = check_suboptimality_bound(&trace, 1).unwrap();
        assert!(last.lhs < 1e-9 && last.holds);
        assert!(check_suboptimality_bound(&trace, 0).is_err());
        assert!(check_suboptimality_bound(&trace, 99).is_err());
    }

    #[test]
    fn bound_arithmetic() {
        let mdp = lake();
        let trace = run_qpi(&mdp, &QpiConfig::new(1e-2, 1, 1)).unwrap();
        let mut t = trace.clone();
        t.records[0].tomography_error = 1e-2;
        let check = check_suboptimality_bound(&t, 1).unwrap();
        let expected = 2.0 * 2f64.sqrt() * 0.9 * 100.0 * 1e-2;
        assert!((check.rhs - expected).abs() < 1e-9);
        assert!(check.vacuous);
    }

    #[test]
    fn per_shot_and_mixture_agree() {
        let mdp = lake();
        let mut config = QpiConfig::new(0.2, 1, 9);
        config.shots = Shots::Fixed(40_000);
        let mix = run_qpi(&mdp, &config).unwrap();
        config.sampling = Sampling::PerShot;
        let per = run_qpi(&mdp, &config).unwrap();
        let a = mix.records[0].histogram.frequencies();
        let b = per.records[0].histogram.frequencies();
        for (x, y) in a.iter().zip(&b) {
            // 5σ of the difference of two binomial frequencies
            let sd = (2.0 * x.max(*y).max(1e-4) / 40_000.0).sqrt();
            assert!((x - y).abs() < 5.0 * sd + 1e-4, "{x} vs {y}");
        }
    }
}
