//! Finite Markov decision processes, exact policy evaluation and the classical
//! baselines (value iteration, policy iteration) used as ground truth.
//!
//! State-action pairs are flattened as `s * A + a` everywhere: in `Q`, in the
//! rows and columns of `P^π`, in feature matrices and in measurement histograms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, SystemKind};

/// Row-sum tolerance for transition tensors and stochastic policies.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default tolerance of the value-iteration oracle.
pub const VALUE_ITERATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    /// Indexed `(s * A + a) * S + s'`.
    transitions: Vec<f64>,
    /// Indexed `s * A + a`.
    rewards: Vec<f64>,
    discount: f64,
}

impl Mdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("state and action sets must be non-empty".into()));
        }
        let sa = num_states * num_actions;
        if transitions.len() != sa * num_states {
            return Err(Error::DimensionMismatch {
                what: "transition tensor length",
                expected: sa * num_states,
                got: transitions.len(),
            });
        }
        if rewards.len() != sa {
            return Err(Error::DimensionMismatch {
                what: "reward vector length",
                expected: sa,
                got: rewards.len(),
            });
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidMdp(format!("discount {discount} outside [0, 1)")));
        }
        for (row, chunk) in transitions.chunks(num_states).enumerate() {
            if chunk.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidMdp(format!("negative probability in row {row}")));
            }
            let total: f64 = chunk.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidMdp(format!(
                    "row {row} (s={}, a={}) sums to {total}",
                    row / num_actions,
                    row % num_actions
                )));
            }
        }
        if let Some(i) = rewards.iter().position(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidMdp(format!(
                "reward {} at index {i} outside [0, 1]",
                rewards[i]
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            transitions,
            rewards,
            discount,
        })
    }

    /// Same dynamics and rewards with a different discount.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.transitions.clone(),
            self.rewards.clone(),
            discount,
        )
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `S * A`.
    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Effective horizon `1 / (1 - γ)`.
    pub fn horizon(&self) -> f64 {
        1.0 / (1.0 - self.discount)
    }

    #[inline]
    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    #[inline]
    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[self.pair_index(s, a) * self.num_states + next]
    }

    /// Next-state distribution of the pair `(s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.pair_index(s, a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[self.pair_index(s, a)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// `P` as an `(S·A) × S` matrix.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.num_pairs(), self.num_states, &self.transitions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic(Vec<usize>),
    /// Row-major `S × A` table of action probabilities.
    Stochastic { num_actions: usize, probs: Vec<f64> },
}

impl Policy {
    pub fn deterministic(actions: Vec<usize>) -> Self {
        Policy::Deterministic(actions)
    }

    pub fn stochastic(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_actions == 0 || probs.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch {
                what: "stochastic policy table",
                expected: num_states * num_actions,
                got: probs.len(),
            });
        }
        for (s, row) in probs.chunks(num_actions).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidPolicy(format!("negative probability in state {s}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidPolicy(format!("state {s} row sums to {total}")));
            }
        }
        Ok(Policy::Stochastic { num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy::Stochastic {
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            Policy::Deterministic(actions) => actions.len(),
            Policy::Stochastic { num_actions, probs } => probs.len() / num_actions,
        }
    }

    /// `π(s, a)`.
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic(actions) => {
                if actions[s] == a {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic { num_actions, probs } => probs[s * num_actions + a],
        }
    }

    /// The action taken in `s`; for stochastic policies the most likely
    /// action, lowest index on ties.
    pub fn action(&self, s: usize) -> usize {
        match self {
            Policy::Deterministic(actions) => actions[s],
            Policy::Stochastic { num_actions, probs } => {
                argmax_lowest(&probs[s * num_actions..(s + 1) * num_actions])
            }
        }
    }

    /// One-hot stochastic form of this policy.
    pub fn to_stochastic(&self, num_actions: usize) -> Policy {
        match self {
            Policy::Deterministic(actions) => {
                let mut probs = vec![0.0; actions.len() * num_actions];
                for (s, &a) in actions.iter().enumerate() {
                    probs[s * num_actions + a] = 1.0;
                }
                Policy::Stochastic { num_actions, probs }
            }
            other => other.clone(),
        }
    }

    /// Deterministic form; stochastic rows collapse to their most likely action.
    pub fn to_deterministic(&self) -> Policy {
        match self {
            Policy::Deterministic(_) => self.clone(),
            Policy::Stochastic { .. } => {
                Policy::Deterministic((0..self.num_states()).map(|s| self.action(s)).collect())
            }
        }
    }

    /// Whether two policies assign the same action distribution everywhere.
    pub fn same_as(&self, other: &Policy, num_actions: usize) -> bool {
        if self.num_states() != other.num_states() {
            return false;
        }
        (0..self.num_states())
            .all(|s| (0..num_actions).all(|a| self.prob(s, a) == other.prob(s, a)))
    }

    pub(crate) fn check_dims(&self, mdp: &Mdp) -> Result<()> {
        if self.num_states() != mdp.num_states() {
            return Err(Error::DimensionMismatch {
                what: "policy state count",
                expected: mdp.num_states(),
                got: self.num_states(),
            });
        }
        match self {
            Policy::Deterministic(actions) => {
                if let Some(&a) = actions.iter().find(|&&a| a >= mdp.num_actions()) {
                    return Err(Error::InvalidPolicy(format!(
                        "action {a} out of range for {} actions",
                        mdp.num_actions()
                    )));
                }
            }
            Policy::Stochastic { num_actions, .. } => {
                if *num_actions != mdp.num_actions() {
                    return Err(Error::DimensionMismatch {
                        what: "policy action count",
                        expected: mdp.num_actions(),
                        got: *num_actions,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Action values `Q(s, a)` stored flat as `s * A + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct QValues {
    num_actions: usize,
    values: Vec<f64>,
}

impl QValues {
    pub fn new(num_actions: usize, values: Vec<f64>) -> Self {
        assert!(num_actions > 0 && values.len().is_multiple_of(num_actions));
        Self { num_actions, values }
    }

    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::new(num_actions, vec![0.0; num_states * num_actions])
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn state_row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    /// `Q / ‖Q‖`; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Vec<f64> {
        let n = self.norm();
        if n > 0.0 {
            self.values.iter().map(|v| v / n).collect()
        } else {
            self.values.clone()
        }
    }

    /// Greedy deterministic policy, lowest action index on ties.
    pub fn greedy(&self) -> Policy {
        greedy_from_values(&self.values, self.num_actions)
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-state argmax over a flat `S × A` score table, lowest index on ties.
pub fn greedy_from_values(scores: &[f64], num_actions: usize) -> Policy {
    Policy::Deterministic(scores.chunks(num_actions).map(argmax_lowest).collect())
}

/// The `(S·A) × (S·A)` matrix `P^π(sa, s'a') = p(s,a,s') π(s',a')`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTransition {
    pub matrix: DMatrix<f64>,
}

impl PolicyTransition {
    pub fn max_row_sum_error(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `I - γ P^π`.
    pub fn evaluation_matrix(&self, discount: f64) -> DMatrix<f64> {
        let n = self.matrix.nrows();
        DMatrix::identity(n, n) - &self.matrix * discount
    }
}

pub fn build_policy_transition(mdp: &Mdp, policy: &Policy) -> Result<PolicyTransition> {
    policy.check_dims(mdp)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let n = mdp.num_pairs();
    let mut matrix = DMatrix::zeros(n, n);
    for s in 0..ns {
        for a in 0..na {
            let row = mdp.pair_index(s, a);
            for (next, &p) in mdp.transition_row(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for next_a in 0..na {
                    let pi = policy.prob(next, next_a);
                    if pi != 0.0 {
                        matrix[(row, mdp.pair_index(next, next_a))] = p * pi;
                    }
                }
            }
        }
    }
    Ok(PolicyTransition { matrix })
}

/// `(T^π Q)(s,a) = r(s,a) + γ Σ p(s,a,s') π(s',a') Q(s',a')`.
pub fn bellman_apply(mdp: &Mdp, policy: &Policy, q: &QValues) -> Result<QValues> {
    policy.check_dims(mdp)?;
    if q.len() != mdp.num_pairs() {
        return Err(Error::DimensionMismatch {
            what: "Q length",
            expected: mdp.num_pairs(),
            got: q.len(),
        });
    }
    let na = mdp.num_actions();
    // V^π(s') = Σ_a' π(s',a') Q(s',a')
    let state_values: Vec<f64> = (0..mdp.num_states())
        .map(|s| (0..na).map(|a| policy.prob(s, a) * q.get(s, a)).sum())
        .collect();
    let gamma = mdp.discount();
    let values = (0..mdp.num_states())
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| {
            let expected: f64 = mdp
                .transition_row(s, a)
                .iter()
                .zip(&state_values)
                .map(|(p, v)| p * v)
                .sum();
            mdp.reward(s, a) + gamma * expected
        })
        .collect();
    Ok(QValues::new(na, values))
}

/// `Q^π` by a dense LU solve of `(I - γP^π) Q = R`.
pub fn solve_exact_q(mdp: &Mdp, policy: &Policy) -> Result<QValues> {
    let ptrans = build_policy_transition(mdp, policy)?;
    let a = ptrans.evaluation_matrix(mdp.discount());
    let b = DVector::from_column_slice(mdp.rewards());
    let q = a.lu().solve(&b).ok_or(Error::Singular(SystemKind::Evaluation))?;
    Ok(QValues::new(mdp.num_actions(), q.as_slice().to_vec()))
}

/// Optimal action values by value iteration, iterated until `‖Q - Q*‖∞ ≤ tol`
/// (the fixed-point residual is then at most `tol` as well).
pub fn value_iteration(mdp: &Mdp, tol: f64) -> Result<(QValues, Policy)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let stop = tol * (1.0 - gamma);
    let mut q = vec![0.0; mdp.num_pairs()];
    let mut v = vec![0.0; ns];
    loop {
        let mut residual: f64 = 0.0;
        let mut next_q = vec![0.0; q.len()];
        for s in 0..ns {
            for a in 0..na {
                let expected: f64 = mdp
                    .transition_row(s, a)
                    .iter()
                    .zip(&v)
                    .map(|(p, v)| p * v)
                    .sum();
                let idx = s * na + a;
                next_q[idx] = mdp.reward(s, a) + gamma * expected;
                residual = residual.max((next_q[idx] - q[idx]).abs());
            }
        }
        q = next_q;
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = q[s * na..(s + 1) * na].iter().copied().fold(f64::MIN, f64::max);
        }
        if residual <= stop {
            break;
        }
    }
    let q = QValues::new(na, q);
    let policy = q.greedy();
    Ok((q, policy))
}

#[derive(Debug, Clone)]
pub struct PolicyIterationOutcome {
    pub policy: Policy,
    /// Evaluate-and-improve steps performed.
    pub iterations: usize,
    pub converged: bool,
    /// `π_0, π_1, …` in order, ending with `policy`.
    pub history: Vec<Policy>,
}

/// Classical policy iteration from the uniform random policy.
pub fn classical_policy_iteration(mdp: &Mdp, max_iters: usize) -> Result<PolicyIterationOutcome> {
    classical_policy_iteration_from(
        mdp,
        Policy::uniform(mdp.num_states(), mdp.num_actions()),
        max_iters,
    )
}

pub fn classical_policy_iteration_from(
    mdp: &Mdp,
    initial: Policy,
    max_iters: usize,
) -> Result<PolicyIterationOutcome> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    initial.check_dims(mdp)?;
    let na = mdp.num_actions();
    let mut history = vec![initial];
    for iteration in 1..=max_iters {
        let current = history.last().expect("non-empty history");
        let q = solve_exact_q(mdp, current)?;
        let next = q.greedy();
        let stationary = next.same_as(current, na);
        history.push(next.clone());
        if stationary {
            return Ok(PolicyIterationOutcome {
                policy: next,
                iterations: iteration,
                converged: true,
                history,
            });
        }
    }
    Ok(PolicyIterationOutcome {
        policy: history.last().cloned().expect("non-empty history"),
        iterations: max_iters,
        converged: false,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distances {
    pub sup: f64,
    pub l2: f64,
    /// `ℓ2 / √n`, the norm weighted by the uniform distribution.
    pub rho: f64,
}

pub fn distance_metrics(a: &[f64], b: &[f64]) -> Result<Distances> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "vector length",
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut sup: f64 = 0.0;
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        sup = sup.max(d);
        sq += d * d;
    }
    let l2 = sq.sqrt();
    let rho = if a.is_empty() { 0.0 } else { l2 / (a.len() as f64).sqrt() };
    Ok(Distances { sup, l2, rho })
}
