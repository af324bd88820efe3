#![allow(dead_code)]

use nalgebra::DMatrix;
use qpi_sim::env::pendulum::{PendulumState, SampleSource, TransitionSample};
use qpi_sim::mdp::{Mdp, Policy};
use qpi_sim::qapi::FeatureMap;
use rand::Rng;

pub fn random_stochastic_rows<R: Rng>(rng: &mut R, rows: usize, cols: usize, sparsity: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let mut row: Vec<f64> = (0..cols)
            .map(|_| if rng.random::<f64>() < sparsity { 0.0 } else { rng.random::<f64>() })
            .collect();
        if row.iter().all(|&x| x == 0.0) {
            row[rng.random_range(0..cols)] = 1.0;
        }
        let sum: f64 = row.iter().sum();
        out.extend(row.iter().map(|x| x / sum));
    }
    out
}

pub fn random_mdp<R: Rng>(rng: &mut R, states: usize, actions: usize, discount: f64) -> Mdp {
    let sparsity = rng.random::<f64>() * 0.8;
    let p = random_stochastic_rows(rng, states * actions, states, sparsity);
    let r = (0..states * actions).map(|_| rng.random::<f64>()).collect();
    Mdp::new(states, actions, p, r, discount).unwrap()
}

pub fn random_policy<R: Rng>(rng: &mut R, states: usize, actions: usize) -> Policy {
    if rng.random_bool(0.5) {
        Policy::Deterministic((0..states).map(|_| rng.random_range(0..actions)).collect())
    } else {
        Policy::stochastic(states, actions, random_stochastic_rows(rng, states, actions, 0.3)).unwrap()
    }
}

/// Finite deterministic MDP over pendulum states, together with one
/// transition sample per state-action pair (in `s·A + a` order) and its
/// Fourier feature matrix.
pub struct ExhaustiveCase {
    pub mdp: Mdp,
    pub phi: DMatrix<f64>,
    pub source: SampleSource,
    pub map: FeatureMap,
    pub states: Vec<PendulumState>,
    pub successor: Vec<usize>,
}

pub fn exhaustive_case<R: Rng>(rng: &mut R, num_states: usize, degree: usize, discount: f64) -> ExhaustiveCase {
    let map = FeatureMap::pendulum(degree).unwrap();
    let na = map.num_actions;
    let states: Vec<PendulumState> = (0..num_states)
        .map(|_| PendulumState::new(rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0)))
        .collect();
    let n = num_states * na;
    let successor: Vec<usize> = (0..n).map(|_| rng.random_range(0..num_states)).collect();
    let rewards: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut p = vec![0.0; n * num_states];
    for (i, &next) in successor.iter().enumerate() {
        p[i * num_states + next] = 1.0;
    }
    let mdp = Mdp::new(num_states, na, p, rewards.clone(), discount).unwrap();
    let mut phi = DMatrix::zeros(n, map.dim());
    let mut samples = Vec::with_capacity(n);
    for s in 0..num_states {
        for a in 0..na {
            let i = s * na + a;
            let row = map.eval(&states[s].normalized(), a).unwrap();
            phi.row_mut(i).copy_from_slice(&row);
            samples.push(TransitionSample {
                state: states[s],
                action: a,
                next_state: states[successor[i]],
                reward: rewards[i],
                terminal: false,
            });
        }
    }
    ExhaustiveCase {
        mdp,
        phi,
        source: SampleSource::new(samples),
        map,
        states,
        successor,
    }
}

impl ExhaustiveCase {
    /// The state policy seen from each sample's next state.
    pub fn sample_policy(&self, policy: &Policy) -> Policy {
        Policy::Deterministic(self.successor.iter().map(|&s| policy.action(s)).collect())
    }
}

/// `x` and `y` at angle below π/2 with `‖x − y‖ ≤ ε`; returns `(x, y, ε)`.
pub fn acute_pair<R: Rng>(rng: &mut R, dim: usize) -> (Vec<f64>, Vec<f64>, f64) {
    loop {
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let eps = norm * 10f64.powf(rng.random_range(-4.0..0.5));
        let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dn == 0.0 {
            continue;
        }
        let len = eps * rng.random::<f64>();
        let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b / dn * len).collect();
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        if dot > 0.0 {
            return (x, y, eps);
        }
    }
}

/// `(‖x/‖x‖ − y/‖y‖‖, √2·ε/‖x‖)`.
pub fn normalized_distance_bound(x: &[f64], y: &[f64], eps: f64) -> (f64, f64) {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a / nx - b / ny).powi(2))
        .sum::<f64>()
        .sqrt();
    (d, std::f64::consts::SQRT_2 * eps / nx)
}
