//! Approximate quantum policy iteration with linear value functions.
//!
//! Policy evaluation solves the LSTDQ system `Φᵀ(Φ − γP^πΦ) w = Φᵀ R` (or its
//! sample-based estimate) through the noisy solver; improvement reads the
//! weight state through one of three measurement strategies.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockenc::{clipped_solve, singular_values};
use crate::env::pendulum::{evaluate_balancing, PendulumParams, PendulumState, SampleSource};
use crate::error::{Error, Result, SystemKind};
use crate::mdp::{
    argmax_lowest, build_policy_transition, distance_metrics, solve_exact_q, value_iteration, Mdp,
    Policy, VALUE_ITERATION_TOL,
};
use crate::qpi::Shots;
use crate::quantum::{
    measure_state, normalize, perturb_unit, sample_outcome, shots_for, sign_resolution, tomography_estimate,
    ExactState, SolverState, StatePreparation,
};

/// Per-action Fourier basis over states in `[0, 1]^d`.
///
/// For action `a` the block at offset `a · 2k^d` holds `cos(π c·s)/k^{d/2}`
/// for every `c ∈ {0..k-1}^d`, followed by the matching sines. Every other
/// block is zero, and the vector has unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub degree: usize,
    pub num_actions: usize,
    pub state_dim: usize,
    coefficients: Vec<Vec<f64>>,
}

impl FeatureMap {
    pub fn new(degree: usize, num_actions: usize, state_dim: usize) -> Result<Self> {
        if degree == 0 || num_actions == 0 || state_dim == 0 {
            return Err(Error::InvalidArgument(
                "degree, action count and state dimension must be positive".into(),
            ));
        }
        let count = degree.pow(state_dim as u32);
        let coefficients = (0..count)
            .map(|mut idx| {
                let mut c = vec![0.0; state_dim];
                for slot in c.iter_mut().rev() {
                    *slot = (idx % degree) as f64;
                    idx /= degree;
                }
                c
            })
            .collect();
        Ok(Self {
            degree,
            num_actions,
            state_dim,
            coefficients,
        })
    }

    /// The pendulum basis: two state variables, three actions.
    pub fn pendulum(degree: usize) -> Result<Self> {
        Self::new(degree, 3, 2)
    }

    /// Entries per action block, `2k^d`.
    pub fn block_len(&self) -> usize {
        2 * self.coefficients.len()
    }

    /// `K = 2 A k^d`.
    pub fn dim(&self) -> usize {
        self.num_actions * self.block_len()
    }

    /// The action-independent block for `state`.
    pub fn state_block(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                what: "state dimension",
                expected: self.state_dim,
                got: state.len(),
            });
        }
        if let Some(v) = state.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "state component {v} outside [0, 1]; preprocess first"
            )));
        }
        let scale = 1.0 / (self.coefficients.len() as f64).sqrt();
        let n = self.coefficients.len();
        let mut block = vec![0.0; 2 * n];
        for (i, c) in self.coefficients.iter().enumerate() {
            let arg: f64 = std::f64::consts::PI * c.iter().zip(state).map(|(a, b)| a * b).sum::<f64>();
            let (s, co) = arg.sin_cos();
            block[i] = co * scale;
            block[n + i] = s * scale;
        }
        Ok(block)
    }

    pub fn eval(&self, state: &[f64], action: usize) -> Result<Vec<f64>> {
        if action >= self.num_actions {
            return Err(Error::InvalidArgument(format!("action {action} out of range")));
        }
        let block = self.state_block(state)?;
        let mut out = vec![0.0; self.dim()];
        out[action * block.len()..(action + 1) * block.len()].copy_from_slice(&block);
        Ok(out)
    }

    /// `Φ(s) w`, one entry per action.
    pub fn action_values(&self, state: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let block = self.state_block(state)?;
        Ok(action_values_from_block(&block, w, self.num_actions))
    }
}

fn action_values_from_block(block: &[f64], w: &[f64], num_actions: usize) -> Vec<f64> {
    (0..num_actions)
        .map(|a| {
            let wa = &w[a * block.len()..(a + 1) * block.len()];
            block.iter().zip(wa).map(|(x, y)| x * y).sum()
        })
        .collect()
}

/// Fourier features of `state ∈ [0, 1]^d` for `action`; length `2 A k^d`.
pub fn fourier_features(state: &[f64], action: usize, num_actions: usize, degree: usize) -> Result<Vec<f64>> {
    FeatureMap::new(degree, num_actions, state.len())?.eval(state, action)
}

/// Features `φ(s, a)` over an indexed set of states.
pub trait ActionFeatures {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn dim(&self) -> usize;
    /// `Φ(s)` as an `A × K` matrix.
    fn state_matrix(&self, s: usize) -> Result<DMatrix<f64>>;

    fn action_values(&self, s: usize, w: &[f64]) -> Result<Vec<f64>> {
        let m = self.state_matrix(s)?;
        Ok((m * DVector::from_column_slice(w)).as_slice().to_vec())
    }
}

/// Rows `s·A + a` of a full feature matrix.
#[derive(Debug, Clone)]
pub struct FiniteFeatures<'a> {
    pub phi: &'a DMatrix<f64>,
    pub num_actions: usize,
}

impl ActionFeatures for FiniteFeatures<'_> {
    fn num_states(&self) -> usize {
        self.phi.nrows() / self.num_actions
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn dim(&self) -> usize {
        self.phi.ncols()
    }

    fn state_matrix(&self, s: usize) -> Result<DMatrix<f64>> {
        Ok(self.phi.rows(s * self.num_actions, self.num_actions).into_owned())
    }
}

/// A feature map evaluated on a list of preprocessed states.
#[derive(Debug, Clone)]
pub struct StateFeatures<'a> {
    pub map: &'a FeatureMap,
    pub states: Vec<Vec<f64>>,
}

impl ActionFeatures for StateFeatures<'_> {
    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn num_actions(&self) -> usize {
        self.map.num_actions
    }

    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn state_matrix(&self, s: usize) -> Result<DMatrix<f64>> {
        let block = self.map.state_block(&self.states[s])?;
        let na = self.map.num_actions;
        let mut m = DMatrix::zeros(na, self.map.dim());
        for a in 0..na {
            for (j, v) in block.iter().enumerate() {
                m[(a, a * block.len() + j)] = *v;
            }
        }
        Ok(m)
    }

    fn action_values(&self, s: usize, w: &[f64]) -> Result<Vec<f64>> {
        self.map.action_values(&self.states[s], w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ModelBased,
    ModelFree,
}

#[derive(Debug, Clone)]
pub struct LstdqSystem {
    pub matrix: DMatrix<f64>,
    pub vector: Vec<f64>,
    pub provenance: Provenance,
    /// Factor `1/‖Φ‖₂` applied to the features. The solution is the
    /// unscaled one divided by this factor.
    pub feature_scale: f64,
    /// `κ` of the unclipped matrix.
    pub kappa: f64,
    /// The feature matrix has (numerically) dependent columns.
    pub rank_deficient: bool,
}

/// `A = c² Φᵀ(Φ − γN)`, `b = c ΦᵀR` with `c = 1/‖Φ‖₂`.
pub fn lstdq_from_rows(
    phi: &DMatrix<f64>,
    next_phi: &DMatrix<f64>,
    rewards: &[f64],
    discount: f64,
    provenance: Provenance,
) -> Result<LstdqSystem> {
    if phi.nrows() == 0 {
        return Err(Error::InvalidArgument("LSTDQ needs at least one sample".into()));
    }
    if next_phi.shape() != phi.shape() || rewards.len() != phi.nrows() {
        return Err(Error::DimensionMismatch {
            what: "LSTDQ rows",
            expected: phi.nrows(),
            got: next_phi.nrows().min(rewards.len()),
        });
    }
    let sv = singular_values(phi);
    let norm = sv[0];
    if !(norm > 0.0) {
        return Err(Error::Singular(SystemKind::Weights));
    }
    let rank_deficient = phi.nrows() < phi.ncols() || sv.last().copied().unwrap_or(0.0) <= 1e-12 * norm;
    let c = 1.0 / norm;
    let matrix = phi.transpose() * (phi - next_phi * discount) * (c * c);
    let vector = (phi.transpose() * DVector::from_column_slice(rewards) * c)
        .as_slice()
        .to_vec();
    let msv = singular_values(&matrix);
    let kappa = match msv.last() {
        Some(&min) if min > 0.0 => msv[0] / min,
        _ => f64::INFINITY,
    };
    Ok(LstdqSystem {
        matrix,
        vector,
        provenance,
        feature_scale: c,
        kappa,
        rank_deficient,
    })
}

/// Exact LSTDQ system of a finite MDP with feature rows indexed `s·A + a`.
pub fn build_lstdq_model_based(mdp: &Mdp, phi: &DMatrix<f64>, policy: &Policy) -> Result<LstdqSystem> {
    if phi.nrows() != mdp.num_pairs() {
        return Err(Error::DimensionMismatch {
            what: "feature rows",
            expected: mdp.num_pairs(),
            got: phi.nrows(),
        });
    }
    let ppi = build_policy_transition(mdp, policy)?;
    let next = &ppi.matrix * phi;
    lstdq_from_rows(phi, &next, mdp.rewards(), mdp.discount(), Provenance::ModelBased)
}

/// Sample features that do not depend on the policy: `Φ̃` and the next-state
/// features for every action.
#[derive(Debug, Clone)]
pub struct SampleFeatures {
    pub phi: DMatrix<f64>,
    /// `next[a]` row `i` is `φ(s̃'_i, a)`, zero when sample `i` is terminal.
    pub next: Vec<DMatrix<f64>>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
}

impl SampleFeatures {
    pub fn new(source: &SampleSource, features: &FeatureMap) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::InvalidArgument("empty sample source".into()));
        }
        let (d, k, na) = (source.len(), features.dim(), features.num_actions);
        let mut phi = DMatrix::zeros(d, k);
        let mut next = vec![DMatrix::zeros(d, k); na];
        let mut next_states = Vec::with_capacity(d);
        for (i, sample) in source.samples().iter().enumerate() {
            let row = features.eval(&sample.state.normalized(), sample.action)?;
            phi.row_mut(i).copy_from_slice(&row);
            let ns = sample.next_state.normalized().to_vec();
            if !sample.terminal {
                let block = features.state_block(&ns)?;
                let len = block.len();
                for (a, m) in next.iter_mut().enumerate() {
                    for (j, v) in block.iter().enumerate() {
                        m[(i, a * len + j)] = *v;
                    }
                }
            }
            next_states.push(ns);
        }
        Ok(Self {
            phi,
            next,
            rewards: source.samples().iter().map(|s| s.reward).collect(),
            next_states,
        })
    }

    pub fn len(&self) -> usize {
        self.phi.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `P̃^πΦ` for the actions chosen at each sample's next state.
    pub fn next_features(&self, policy: &Policy) -> Result<DMatrix<f64>> {
        let d = self.len();
        if policy.num_states() != d {
            return Err(Error::DimensionMismatch {
                what: "policy over sample next-states",
                expected: d,
                got: policy.num_states(),
            });
        }
        if !matches!(policy, Policy::Deterministic(_)) {
            return Err(Error::InvalidPolicy("sample-based evaluation needs a deterministic policy".into()));
        }
        let mut out = DMatrix::zeros(d, self.phi.ncols());
        for i in 0..d {
            let a = policy.action(i);
            if a >= self.next.len() {
                return Err(Error::InvalidPolicy(format!("action {a} out of range")));
            }
            out.row_mut(i).copy_from(&self.next[a].row(i));
        }
        Ok(out)
    }

    pub fn system(&self, policy: &Policy, discount: f64) -> Result<LstdqSystem> {
        let next = self.next_features(policy)?;
        lstdq_from_rows(&self.phi, &next, &self.rewards, discount, Provenance::ModelFree)
    }
}

/// Sample-based LSTDQ system. `policy` assigns an action to the next state
/// of every sample.
pub fn build_lstdq_model_free(
    source: &SampleSource,
    features: &FeatureMap,
    policy: &Policy,
    discount: f64,
) -> Result<LstdqSystem> {
    SampleFeatures::new(source, features)?.system(policy, discount)
}

/// Normalized solution of the clipped system.
pub fn clipped_weights(system: &LstdqSystem, clip: f64) -> Result<Vec<f64>> {
    let w = clipped_solve(&system.matrix, &system.vector, clip, SystemKind::Weights)?;
    normalize(&w).ok_or(Error::Singular(SystemKind::Weights))
}

/// One noisy solver output for the clipped system.
pub fn solve_weights_sim<R: Rng + ?Sized>(
    system: &LstdqSystem,
    epsilon: f64,
    clip: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = clipped_weights(system, clip)?;
    Ok(perturb_unit(&w, epsilon, rng))
}

#[derive(Debug, Clone)]
pub struct Improvement {
    pub policy: Policy,
    /// States whose counts were all zero and kept the previous action.
    pub fallback_states: usize,
    /// Inner products `φ(s, a) · w` evaluated classically.
    pub inner_products: u64,
}

fn check_previous(previous: &Policy, num_states: usize) -> Result<()> {
    if previous.num_states() != num_states {
        return Err(Error::DimensionMismatch {
            what: "previous policy state count",
            expected: num_states,
            got: previous.num_states(),
        });
    }
    Ok(())
}

/// Strategy 1: measure `|Φŵ⟩` over all `(s, a)` and take per-state argmax of
/// the counts. A fresh weight state is prepared for every shot.
pub fn improve_global<P, R>(
    weights: &P,
    features: &FiniteFeatures<'_>,
    shots: u64,
    previous: &Policy,
    rng: &mut R,
) -> Result<Improvement>
where
    P: StatePreparation + ?Sized,
    R: Rng,
{
    let (ns, na) = (features.num_states(), features.num_actions);
    check_previous(previous, ns)?;
    let mut counts = vec![0u64; ns * na];
    for _ in 0..shots {
        let w = weights.prepare(rng);
        let v = features.phi * DVector::from_column_slice(&w);
        if let Some(u) = normalize(v.as_slice()) {
            counts[sample_outcome(&u, rng)] += 1;
        }
    }
    let mut fallback_states = 0;
    let actions = (0..ns)
        .map(|s| {
            let row = &counts[s * na..(s + 1) * na];
            if row.iter().all(|c| *c == 0) {
                fallback_states += 1;
                previous.action(s)
            } else {
                argmax_lowest(&row.iter().map(|c| *c as f64).collect::<Vec<_>>())
            }
        })
        .collect();
    Ok(Improvement {
        policy: Policy::Deterministic(actions),
        fallback_states,
        inner_products: 0,
    })
}

/// Strategy 2: signed ℓ∞ tomography of the weights, then classical greedy
/// improvement with the estimate.
pub fn improve_tomography<P, R, F>(
    weights: &P,
    features: &F,
    shots: u64,
    sign_resolution: f64,
    rng: &mut R,
) -> Result<Improvement>
where
    P: StatePreparation + ?Sized,
    F: ActionFeatures + ?Sized,
    R: Rng,
{
    let estimate = tomography_estimate(weights, shots, true, sign_resolution, rng)?;
    let ns = features.num_states();
    let na = features.num_actions();
    let actions = (0..ns)
        .map(|s| features.action_values(s, &estimate.values).map(|q| argmax_lowest(&q)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Improvement {
        policy: Policy::Deterministic(actions),
        fallback_states: 0,
        inner_products: (ns * na) as u64,
    })
}

/// Strategy 3: for each state, measure `|Φ(s)ŵ⟩` over actions `shots` times,
/// with a fresh weight state per shot, and take the argmax of the counts.
pub fn improve_per_state<P, R, F>(
    weights: &P,
    features: &F,
    shots: u64,
    previous: &Policy,
    rng: &mut R,
) -> Result<Improvement>
where
    P: StatePreparation + ?Sized,
    F: ActionFeatures + ?Sized,
    R: Rng,
{
    let ns = features.num_states();
    let na = features.num_actions();
    check_previous(previous, ns)?;
    let mut fallback_states = 0;
    let mut actions = Vec::with_capacity(ns);
    let mut counts = vec![0u64; na];
    for s in 0..ns {
        let m = features.state_matrix(s)?;
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..shots {
            let w = weights.prepare(rng);
            let v = &m * DVector::from_column_slice(&w);
            if let Some(u) = normalize(v.as_slice()) {
                counts[sample_outcome(&u, rng)] += 1;
            }
        }
        if counts.iter().all(|c| *c == 0) {
            fallback_states += 1;
            actions.push(previous.action(s));
        } else {
            actions.push(argmax_lowest(&counts.iter().map(|c| *c as f64).collect::<Vec<_>>()));
        }
    }
    Ok(Improvement {
        policy: Policy::Deterministic(actions),
        fallback_states,
        inner_products: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Global,
    Tomography,
    PerState,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" | "1" => Ok(Strategy::Global),
            "tomography" | "2" => Ok(Strategy::Tomography),
            "per-state" | "per_state" | "3" => Ok(Strategy::PerState),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QapiConfig {
    pub epsilon: f64,
    /// `Auto` resolves to `shots_for` over the measured register: `S·A` for
    /// the global strategy, `K` for tomography, `A` per state.
    pub shots: Shots,
    /// Zero returns the initial policy unchanged.
    pub max_iterations: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub clip: f64,
    /// Reuse one weight state per iteration instead of a fresh one per shot.
    pub cached_weights: bool,
    pub early_stop: bool,
    /// Uniform (finite) or all-zero-action (sample-based) when `None`.
    pub initial: Option<Policy>,
}

impl QapiConfig {
    pub fn new(epsilon: f64, max_iterations: usize, seed: u64, strategy: Strategy) -> Self {
        Self {
            epsilon,
            shots: Shots::Auto,
            max_iterations,
            seed,
            strategy,
            clip: 1e-3,
            cached_weights: false,
            early_stop: false,
            initial: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::InvalidArgument(format!("clip {} outside (0, 1)", self.clip)));
        }
        Ok(())
    }

    fn resolve_shots(&self, register: usize) -> Result<u64> {
        match self.shots {
            Shots::Fixed(0) => Err(Error::InvalidArgument("shot count must be at least 1".into())),
            Shots::Fixed(m) => Ok(m),
            Shots::Auto => shots_for(register.max(2), self.epsilon),
        }
    }
}

pub enum QapiEnvironment<'a> {
    /// Finite MDP with a full feature matrix (rows `s·A + a`).
    Finite { mdp: &'a Mdp, phi: &'a DMatrix<f64> },
    /// Transition samples; the policy lives on the samples' next states.
    Samples {
        features: &'a SampleFeatures,
        map: &'a FeatureMap,
        discount: f64,
    },
}

#[derive(Debug, Clone)]
pub struct QapiRecord {
    pub iteration: usize,
    pub policy: Policy,
    /// Normalized clipped solution.
    pub weights: Vec<f64>,
    /// One noisy solver output.
    pub weights_hat: Vec<f64>,
    pub feature_scale: f64,
    pub kappa: f64,
    pub rank_deficient: bool,
    pub next_policy: Policy,
    pub fallback_states: usize,
    pub inner_products: u64,
    /// Finite case: `‖Q^{π'} − Q*‖∞` of the improved policy.
    pub next_sup_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct QapiTrace {
    pub initial: Policy,
    pub records: Vec<QapiRecord>,
    pub shots: u64,
    pub stopped_early: bool,
}

impl QapiTrace {
    pub fn final_policy(&self) -> &Policy {
        self.records.last().map(|r| &r.next_policy).unwrap_or(&self.initial)
    }
}

pub fn run_qapi(env: &QapiEnvironment<'_>, config: &QapiConfig) -> Result<QapiTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (num_states, num_actions, dim) = match env {
        QapiEnvironment::Finite { mdp, phi } => {
            if phi.nrows() != mdp.num_pairs() {
                return Err(Error::DimensionMismatch {
                    what: "feature rows",
                    expected: mdp.num_pairs(),
                    got: phi.nrows(),
                });
            }
            (mdp.num_states(), mdp.num_actions(), phi.ncols())
        }
        QapiEnvironment::Samples { features, map, .. } => (features.len(), map.num_actions, map.dim()),
    };
    let shots = config.resolve_shots(match config.strategy {
        Strategy::Global => num_states * num_actions,
        Strategy::Tomography => dim,
        Strategy::PerState => num_actions,
    })?;
    let initial = match (&config.initial, env) {
        (Some(p), _) => p.clone(),
        (None, QapiEnvironment::Finite { .. }) => Policy::uniform(num_states, num_actions),
        (None, QapiEnvironment::Samples { .. }) => Policy::Deterministic(vec![0; num_states]),
    };
    if initial.num_states() != num_states {
        return Err(Error::DimensionMismatch {
            what: "initial policy state count",
            expected: num_states,
            got: initial.num_states(),
        });
    }
    let q_star = match env {
        QapiEnvironment::Finite { mdp, .. } => Some(value_iteration(mdp, VALUE_ITERATION_TOL)?.0),
        _ => None,
    };
    let state_features = match env {
        QapiEnvironment::Samples { features, map, .. } => Some(StateFeatures {
            map,
            states: features.next_states.clone(),
        }),
        _ => None,
    };

    let mut policy = initial.clone();
    let mut records = Vec::new();
    let mut stopped_early = false;
    for iteration in 1..=config.max_iterations {
        let system = match env {
            QapiEnvironment::Finite { mdp, phi } => build_lstdq_model_based(mdp, phi, &policy)?,
            QapiEnvironment::Samples { features, discount, .. } => features.system(&policy, *discount)?,
        };
        let weights = clipped_weights(&system, config.clip)?;
        let weights_hat = perturb_unit(&weights, config.epsilon, &mut rng);
        let fresh = SolverState {
            exact: weights.clone(),
            epsilon: config.epsilon,
        };
        let cached = ExactState(weights_hat.clone());
        let source: &dyn StatePreparation = if config.cached_weights { &cached } else { &fresh };
        let improvement = match (env, config.strategy) {
            (QapiEnvironment::Finite { phi, .. }, Strategy::Global) => {
                let f = FiniteFeatures { phi, num_actions };
                improve_global(source, &f, shots, &policy, &mut rng)?
            }
            (QapiEnvironment::Finite { phi, .. }, Strategy::Tomography) => {
                let f = FiniteFeatures { phi, num_actions };
                improve_tomography(source, &f, shots, sign_resolution(config.epsilon), &mut rng)?
            }
            (QapiEnvironment::Finite { phi, .. }, Strategy::PerState) => {
                let f = FiniteFeatures { phi, num_actions };
                improve_per_state(source, &f, shots, &policy, &mut rng)?
            }
            (QapiEnvironment::Samples { .. }, Strategy::Global) => {
                return Err(Error::InvalidArgument(
                    "the global strategy needs a finite state space".into(),
                ))
            }
            (QapiEnvironment::Samples { .. }, Strategy::Tomography) => {
                let f = state_features.as_ref().expect("sample features");
                improve_tomography(source, f, shots, sign_resolution(config.epsilon), &mut rng)?
            }
            (QapiEnvironment::Samples { .. }, Strategy::PerState) => {
                let f = state_features.as_ref().expect("sample features");
                improve_per_state(source, f, shots, &policy, &mut rng)?
            }
        };
        let next_policy = improvement.policy;
        let next_sup_gap = match (env, &q_star) {
            (QapiEnvironment::Finite { mdp, .. }, Some(q_star)) => {
                let q = solve_exact_q(mdp, &next_policy)?;
                Some(distance_metrics(q.values(), q_star.values())?.sup)
            }
            _ => None,
        };
        let repeated = next_policy.same_as(&policy, num_actions);
        records.push(QapiRecord {
            iteration,
            policy: std::mem::replace(&mut policy, next_policy.clone()),
            weights,
            weights_hat,
            feature_scale: system.feature_scale,
            kappa: system.kappa,
            rank_deficient: system.rank_deficient,
            next_policy,
            fallback_states: improvement.fallback_states,
            inner_products: improvement.inner_products,
            next_sup_gap,
        });
        if config.early_stop && repeated {
            stopped_early = iteration < config.max_iterations;
            break;
        }
    }
    Ok(QapiTrace {
        initial,
        records,
        shots,
        stopped_early,
    })
}

/// Greedy pendulum controller for a weight vector.
pub fn greedy_controller<'a>(map: &'a FeatureMap, w: &'a [f64]) -> impl Fn(PendulumState) -> usize + 'a {
    move |state| {
        let block = map
            .state_block(&state.normalized())
            .expect("normalized states lie in the unit square");
        argmax_lowest(&action_values_from_block(&block, w, map.num_actions))
    }
}

/// Mean balancing length of the greedy controller of each iteration's
/// noisy weights.
pub fn balancing_curve(
    trace: &QapiTrace,
    params: &PendulumParams,
    map: &FeatureMap,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    trace
        .records
        .iter()
        .map(|r| evaluate_balancing(params, greedy_controller(map, &r.weights_hat), episodes, max_steps, seed))
        .collect()
}

/// Measures `|Φŵ⟩` `shots` times; a convenience for single-shot inspection.
pub fn measure_values<R: Rng + ?Sized>(phi: &DMatrix<f64>, w: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    let v = phi * DVector::from_column_slice(w);
    let u = normalize(v.as_slice()).ok_or(Error::Singular(SystemKind::Weights))?;
    Ok(measure_state(&u, shots, rng)?.counts)
}
