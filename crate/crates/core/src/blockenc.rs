//! Explicit small-scale block-encodings.
//!
//! A matrix `A ∈ R^{m×n}` is encoded by a pair of isometries: the row map
//! sends `|i⟩` to `(1/α) Σ_j a_ij^p |i,j⟩ + |garbage⟩` and the column map sends
//! `|j⟩` to `(1/β) Σ_i a_ij^{1-p} |i,j⟩ + |garbage⟩`. Their overlap
//! `⟨col_j | row_i⟩ = a_ij / (αβ)` is the encoded block with normalization
//! `μ = αβ`. Garbage lives in ancilla blocks orthogonal to every `|i,j⟩`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result, SystemKind};
use crate::mdp::{build_policy_transition, Mdp, Policy};

/// Largest total Hilbert-space dimension built densely.
pub const MAX_DENSE_DIM: usize = 1 << 20;

/// Tolerance for isometry and reconstruction checks.
pub const ENCODING_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OraclePair {
    /// `dim × m`, columns indexed by the row index `i`.
    pub row_map: DMatrix<f64>,
    /// `dim × n`, columns indexed by the column index `j`.
    pub col_map: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Exponent split `p`.
    pub exponent: f64,
    rows: usize,
    cols: usize,
}

impl OraclePair {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mu(&self) -> f64 {
        self.alpha * self.beta
    }

    /// Index of `|i,j⟩` in the main register.
    pub fn main_index(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    pub fn main_dim(&self) -> usize {
        self.rows * self.cols
    }

    /// `max |VᵀV - I|` over both maps.
    pub fn isometry_error(&self) -> f64 {
        isometry_error(&self.row_map).max(isometry_error(&self.col_map))
    }

    /// The block `(col_map)ᵀ row_map`, transposed to `m × n`: `A / μ`.
    pub fn block(&self) -> DMatrix<f64> {
        (self.col_map.transpose() * &self.row_map).transpose()
    }

    pub fn encoding(&self) -> BlockEncoding {
        BlockEncoding {
            mu: self.mu(),
            block: self.block(),
        }
    }
}

fn isometry_error(v: &DMatrix<f64>) -> f64 {
    let gram = v.transpose() * v;
    let n = gram.nrows();
    (gram - DMatrix::identity(n, n)).amax()
}

/// Ancilla columns `W` with `WᵀW = I - G`, `G` the Gram matrix of the encoded
/// parts. Built from the eigen-decomposition of `I - G`.
fn garbage_completion(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    let rest = DMatrix::identity(n, n) - gram;
    let eig = SymmetricEigen::new(rest);
    if eig.eigenvalues.iter().any(|l| *l < -1e-9) {
        return Err(Error::InvalidArgument(
            "normalization too small: encoded columns exceed unit norm".into(),
        ));
    }
    let sqrt = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose())
}

fn power(a: f64, p: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        Ok(a)
    } else if p == 0.0 {
        Ok(1.0)
    } else if a > 0.0 {
        Ok(a.powf(p))
    } else {
        Err(Error::InvalidArgument(format!(
            "fractional exponent {p} needs non-negative entries"
        )))
    }
}

/// Row/column oracle pair for `a` with exponent split `p`. `alpha` and
/// `beta` default to the tight values `√s_{2p}(A)` and `√s_{2(1-p)}(Aᵀ)`;
/// looser bounds may be supplied.
pub fn build_oracle_pair(
    a: &DMatrix<f64>,
    exponent: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> Result<OraclePair> {
    if !(0.0..=1.0).contains(&exponent) {
        return Err(Error::InvalidArgument(format!("exponent {exponent} outside [0, 1]")));
    }
    let (m, n) = a.shape();
    let dim = m * n + m + n;
    if dim > MAX_DENSE_DIM {
        return Err(Error::TooLarge { dim, cap: MAX_DENSE_DIM });
    }
    let mut row_w = DMatrix::zeros(m, n);
    let mut col_w = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            row_w[(i, j)] = power(a[(i, j)], exponent)?;
            col_w[(i, j)] = power(a[(i, j)], 1.0 - exponent)?;
        }
    }
    let tight_alpha = row_w
        .row_iter()
        .map(|r| r.norm_squared())
        .fold(0.0, f64::max)
        .sqrt();
    let tight_beta = col_w
        .column_iter()
        .map(|c| c.norm_squared())
        .fold(0.0, f64::max)
        .sqrt();
    let alpha = pick_bound("alpha", alpha, tight_alpha)?;
    let beta = pick_bound("beta", beta, tight_beta)?;

    let mut row_map = DMatrix::zeros(dim, m);
    for i in 0..m {
        for j in 0..n {
            row_map[(i * n + j, i)] = row_w[(i, j)] / alpha;
        }
    }
    let mut col_map = DMatrix::zeros(dim, n);
    for j in 0..n {
        for i in 0..m {
            col_map[(i * n + j, j)] = col_w[(i, j)] / beta;
        }
    }
    let row_main = row_map.rows(0, m * n).into_owned();
    let row_garbage = garbage_completion(&(row_main.transpose() * &row_main))?;
    row_map.view_mut((m * n, 0), (m, m)).copy_from(&row_garbage);
    let col_main = col_map.rows(0, m * n).into_owned();
    let col_garbage = garbage_completion(&(col_main.transpose() * &col_main))?;
    col_map.view_mut((m * n + m, 0), (n, n)).copy_from(&col_garbage);

    Ok(OraclePair {
        row_map,
        col_map,
        alpha,
        beta,
        exponent,
        rows: m,
        cols: n,
    })
}

fn pick_bound(name: &str, given: Option<f64>, tight: f64) -> Result<f64> {
    let value = given.unwrap_or(tight);
    if value < tight * (1.0 - 1e-12) || value <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{name} = {value} is below the required {tight}"
        )));
    }
    Ok(value)
}

/// `c_P`: the largest column sum of `P` viewed as an `(S·A) × S` matrix.
pub fn compute_cp(mdp: &Mdp) -> f64 {
    let ns = mdp.num_states();
    let mut col = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..mdp.num_actions() {
            for (next, p) in mdp.transition_row(s, a).iter().enumerate() {
                col[next] += p;
            }
        }
    }
    col.into_iter().fold(0.0, f64::max)
}

/// Oracles for `P` with `p = 1/2`, `α = 1`, `β = √c_P`.
pub fn build_oracle_pair_p(mdp: &Mdp) -> Result<OraclePair> {
    let cp = compute_cp(mdp);
    build_oracle_pair(&mdp.transition_matrix(), 0.5, Some(1.0), Some(cp.sqrt()))
}

/// `Π(sa, s') = 1[s = s'] π(s, a)`, an `(S·A) × S` matrix.
pub fn build_projection_pi(policy: &Policy, num_states: usize, num_actions: usize) -> Result<DMatrix<f64>> {
    if policy.num_states() != num_states {
        return Err(Error::DimensionMismatch {
            what: "policy state count",
            expected: num_states,
            got: policy.num_states(),
        });
    }
    let mut pi = DMatrix::zeros(num_states * num_actions, num_states);
    for s in 0..num_states {
        for a in 0..num_actions {
            pi[(s * num_actions + a, s)] = policy.prob(s, a);
        }
    }
    Ok(pi)
}

/// Oracles for `Π` with `p = 1/2`; a 1-block-encoding for any policy.
pub fn build_oracle_pair_pi(policy: &Policy, num_states: usize, num_actions: usize) -> Result<OraclePair> {
    let pi = build_projection_pi(policy, num_states, num_actions)?;
    build_oracle_pair(&pi, 0.5, Some(1.0), Some(1.0))
}

/// Oracles for a feature matrix with unit-norm rows, `p = 1`. The column
/// normalization defaults to the square root of the largest number of
/// nonzeros in a column.
pub fn build_oracle_pair_features(phi: &DMatrix<f64>, beta: Option<f64>) -> Result<OraclePair> {
    for (i, row) in phi.row_iter().enumerate() {
        if (row.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("feature row {i} is not unit norm")));
        }
    }
    build_oracle_pair(phi, 1.0, Some(1.0), beta)
}

/// A recovered block `A / μ` together with its normalization.
#[derive(Debug, Clone)]
pub struct BlockEncoding {
    pub mu: f64,
    pub block: DMatrix<f64>,
}

impl BlockEncoding {
    /// The trivial encoding of the identity.
    pub fn identity(n: usize) -> Self {
        Self {
            mu: 1.0,
            block: DMatrix::identity(n, n),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            mu: self.mu,
            block: self.block.transpose(),
        }
    }

    /// `μ · block`, the encoded matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.block * self.mu
    }

    /// Checks the encoding against the intended matrix.
    pub fn report(&self, target: &DMatrix<f64>) -> Result<EncodingReport> {
        if target.shape() != self.block.shape() {
            return Err(Error::DimensionMismatch {
                what: "encoded block shape",
                expected: self.block.nrows(),
                got: target.nrows(),
            });
        }
        let error = (&self.block - target / self.mu).amax();
        Ok(EncodingReport {
            mu: self.mu,
            reconstruction_error: error,
            kappa: condition_number(target, None).unwrap_or(f64::INFINITY),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingReport {
    pub mu: f64,
    /// `max |block - A/μ|`.
    pub reconstruction_error: f64,
    pub kappa: f64,
}

/// Recovers the block encoded by `pair` and compares it with `a`.
pub fn reconstruct_block(pair: &OraclePair, a: &DMatrix<f64>) -> Result<EncodingReport> {
    pair.encoding().report(a)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Combination {
    /// `A_1 A_2 ⋯`, normalization `Π μ_i`.
    Product,
    /// `Σ λ_i A_i`, normalization `Σ |λ_i| μ_i`.
    LinearCombination(Vec<f64>),
}

pub fn combine_encodings(parts: &[BlockEncoding], mode: &Combination) -> Result<BlockEncoding> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to combine".into()))?;
    match mode {
        Combination::Product => {
            let mut block = first.block.clone();
            let mut mu = first.mu;
            for part in &parts[1..] {
                if block.ncols() != part.block.nrows() {
                    return Err(Error::DimensionMismatch {
                        what: "product inner dimension",
                        expected: block.ncols(),
                        got: part.block.nrows(),
                    });
                }
                block = &block * &part.block;
                mu *= part.mu;
            }
            Ok(BlockEncoding { mu, block })
        }
        Combination::LinearCombination(coeffs) => {
            if coeffs.len() != parts.len() {
                return Err(Error::DimensionMismatch {
                    what: "coefficient count",
                    expected: parts.len(),
                    got: coeffs.len(),
                });
            }
            let mu: f64 = parts.iter().zip(coeffs).map(|(p, l)| l.abs() * p.mu).sum();
            let mut block = DMatrix::zeros(first.block.nrows(), first.block.ncols());
            for (part, l) in parts.iter().zip(coeffs) {
                if part.block.shape() != block.shape() {
                    return Err(Error::DimensionMismatch {
                        what: "summand shape",
                        expected: block.nrows(),
                        got: part.block.nrows(),
                    });
                }
                block += &part.block * (l * part.mu / mu);
            }
            Ok(BlockEncoding { mu, block })
        }
    }
}

/// Encoding of `P^π = P Πᵀ` as the product of the `P` and `Πᵀ` encodings.
pub fn policy_transition_encoding(mdp: &Mdp, policy: &Policy) -> Result<BlockEncoding> {
    let p = build_oracle_pair_p(mdp)?.encoding();
    let pi = build_oracle_pair_pi(policy, mdp.num_states(), mdp.num_actions())?.encoding();
    combine_encodings(&[p, pi.transpose()], &Combination::Product)
}

/// Encoding of `I - γP^π` from the identity and `P^π` encodings.
pub fn evaluation_matrix_encoding(mdp: &Mdp, policy: &Policy) -> Result<BlockEncoding> {
    let ppi = policy_transition_encoding(mdp, policy)?;
    let id = BlockEncoding::identity(mdp.num_pairs());
    combine_encodings(&[id, ppi], &Combination::LinearCombination(vec![1.0, -mdp.discount()]))
}

/// Singular values, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// `σ_max / σ_min`. With `clip`, singular values below `clip · σ_max` are
/// first raised to that floor.
pub fn condition_number(a: &DMatrix<f64>, clip: Option<f64>) -> Result<f64> {
    let sv = singular_values(a);
    let max = sv.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return Err(Error::InvalidArgument("condition number of a zero matrix".into()));
    }
    let mut min = sv.last().copied().unwrap_or(0.0);
    if let Some(c) = clip {
        min = min.max(c * max);
    }
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}

/// Solves `A x = b` through the SVD with singular values floored at
/// `clip · σ_max`.
pub fn clipped_solve(a: &DMatrix<f64>, b: &[f64], clip: f64, kind: SystemKind) -> Result<Vec<f64>> {
    if !(clip > 0.0 && clip < 1.0) {
        return Err(Error::InvalidArgument(format!("clip {clip} outside (0, 1)")));
    }
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.max();
    if !(max > 0.0) {
        return Err(Error::Singular(kind));
    }
    let floor = clip * max;
    let u = svd.u.as_ref().expect("u computed");
    let vt = svd.v_t.as_ref().expect("v_t computed");
    let rhs = u.transpose() * DVector::from_column_slice(b);
    let scaled = DVector::from_iterator(
        rhs.len(),
        rhs.iter()
            .zip(svd.singular_values.iter())
            .map(|(r, s)| r / s.max(floor)),
    );
    let x = vt.transpose() * scaled;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(kind));
    }
    Ok(x.as_slice().to_vec())
}

/// `A` with its singular values floored at `clip · σ_max`.
pub fn clip_singular_values(a: &DMatrix<f64>, clip: f64) -> DMatrix<f64> {
    let mut svd = a.clone().svd(true, true);
    let floor = clip * svd.singular_values.max();
    for s in svd.singular_values.iter_mut() {
        *s = s.max(floor);
    }
    svd.recompose().expect("u and v_t computed")
}

/// Checks `P Πᵀ = P^π` for a policy, returning the max-abs deviation.
pub fn projection_identity_error(mdp: &Mdp, policy: &Policy) -> Result<f64> {
    let pi = build_projection_pi(policy, mdp.num_states(), mdp.num_actions())?;
    let direct = build_policy_transition(mdp, policy)?;
    Ok((mdp.transition_matrix() * pi.transpose() - direct.matrix).amax())
}

/// Note attached to every cost report.
pub const COST_MODEL_NOTE: &str = "asymptotic cost formulas with constants dropped and polylog(x) \
evaluated as ln(x) (floored at 1); the speedup claims are not empirically checkable at this scale";

/// Oracle costs and parameters for the symbolic cost formulas. Unset fields
/// are reported as missing by [`estimate_cost`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostModel {
    pub t_p: Option<f64>,
    pub t_ppi: Option<f64>,
    pub t_r: Option<f64>,
    pub t_pi: Option<f64>,
    pub t_phi: Option<f64>,
    pub t_phi_tilde: Option<f64>,
    pub t_r_tilde: Option<f64>,
    pub num_states: Option<f64>,
    pub num_actions: Option<f64>,
    pub num_features: Option<f64>,
    pub num_samples: Option<f64>,
    pub discount: Option<f64>,
    pub epsilon: Option<f64>,
    pub mu_ppi: Option<f64>,
    pub mu_phi: Option<f64>,
    pub mu_phi_tilde: Option<f64>,
    pub kappa_phi: Option<f64>,
    pub kappa_phi_tilde: Option<f64>,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostFormula {
    /// Exact evaluation: `(μ_{P^π} T_{P^π} + T_R) Γ polylog(Γ/ε)`.
    QuantumEvaluation,
    /// Model-based LSTDQ weights.
    ModelBasedWeights,
    /// Model-free LSTDQ weights.
    ModelFreeWeights,
    /// `(S·A)^ω`.
    ClassicalPi,
    /// `S·A·K² + K^ω`.
    ClassicalLspi,
}

impl CostFormula {
    pub const ALL: [CostFormula; 5] = [
        CostFormula::QuantumEvaluation,
        CostFormula::ModelBasedWeights,
        CostFormula::ModelFreeWeights,
        CostFormula::ClassicalPi,
        CostFormula::ClassicalLspi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostFormula::QuantumEvaluation => "quantum_evaluation",
            CostFormula::ModelBasedWeights => "model_based_weights",
            CostFormula::ModelFreeWeights => "model_free_weights",
            CostFormula::ClassicalPi => "classical_pi",
            CostFormula::ClassicalLspi => "classical_lspi",
        }
    }
}

fn need(value: Option<f64>, name: &'static str) -> Result<f64> {
    match value {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(Error::InvalidArgument(format!("cost parameter `{name}` = {v} must be positive"))),
        None => Err(Error::MissingParameter(name)),
    }
}

fn polylog(x: f64) -> f64 {
    x.ln().max(1.0)
}

pub fn estimate_cost(model: &CostModel, which: CostFormula) -> Result<f64> {
    let horizon = || -> Result<f64> {
        let gamma = model.discount.ok_or(Error::MissingParameter("discount"))?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("discount {gamma} outside [0, 1)")));
        }
        Ok(1.0 / (1.0 - gamma))
    };
    match which {
        CostFormula::QuantumEvaluation => {
            let big_gamma = horizon()?;
            let eps = need(model.epsilon, "epsilon")?;
            let mu = need(model.mu_ppi, "mu_ppi")?;
            let t_ppi = need(model.t_ppi, "t_ppi")?;
            let t_r = need(model.t_r, "t_r")?;
            Ok((mu * t_ppi + t_r) * big_gamma * polylog(big_gamma / eps))
        }
        CostFormula::ModelBasedWeights => {
            let big_gamma = horizon()?;
            let eps = need(model.epsilon, "epsilon")?;
            let kappa = need(model.kappa_phi, "kappa_phi")?;
            let mu_phi = need(model.mu_phi, "mu_phi")?;
            let mu_ppi = need(model.mu_ppi, "mu_ppi")?;
            let t_phi = need(model.t_phi, "t_phi")?;
            let t_ppi = need(model.t_ppi, "t_ppi")?;
            let t_r = need(model.t_r, "t_r")?;
            let inner = (mu_phi * mu_phi * mu_ppi + mu_phi * kappa) * t_phi
                + mu_phi * mu_phi * mu_ppi * t_ppi
                + kappa * t_r;
            Ok(kappa * kappa * inner * big_gamma * polylog(kappa * big_gamma / eps))
        }
        CostFormula::ModelFreeWeights => {
            let big_gamma = horizon()?;
            let eps = need(model.epsilon, "epsilon")?;
            let kappa = need(model.kappa_phi_tilde, "kappa_phi_tilde")?;
            let mu = need(model.mu_phi_tilde, "mu_phi_tilde")?;
            let t_phi = need(model.t_phi_tilde, "t_phi_tilde")?;
            let t_r = need(model.t_r_tilde, "t_r_tilde")?;
            let inner = mu * mu * t_phi + kappa * mu * t_phi + kappa * t_r;
            Ok(kappa * kappa * inner * big_gamma * polylog(kappa * big_gamma / eps))
        }
        CostFormula::ClassicalPi => {
            let sa = need(model.num_states, "num_states")? * need(model.num_actions, "num_actions")?;
            Ok(sa.powf(need(model.omega, "omega")?))
        }
        CostFormula::ClassicalLspi => {
            let sa = need(model.num_states, "num_states")? * need(model.num_actions, "num_actions")?;
            let k = need(model.num_features, "num_features")?;
            Ok(sa * k * k + k.powf(need(model.omega, "omega")?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::frozenlake::{frozenlake_to_mdp, parse_map, MAP_4X4};

    fn lake() -> Mdp {
        frozenlake_to_mdp(&parse_map(MAP_4X4).unwrap(), 0.9).unwrap()
    }

    #[test]
    fn self_loop_cp_is_one() {
        let mdp = Mdp::new(1, 1, vec![1.0], vec![0.0], 0.5).unwrap();
        assert_eq!(compute_cp(&mdp), 1.0);
    }

    #[test]
    fn frozenlake_p_encoding() {
        let mdp = lake();
        let cp = compute_cp(&mdp);
        assert!(cp <= 8.0);
        let pair = build_oracle_pair_p(&mdp).unwrap();
        assert!(pair.isometry_error() < ENCODING_TOL);
        let report = reconstruct_block(&pair, &mdp.transition_matrix()).unwrap();
        assert!(report.reconstruction_error < ENCODING_TOL);
        assert!((report.mu - cp.sqrt()).abs() < 1e-12);
        // deterministic MDP: one nonzero per row_map main block
        for i in 0..pair.rows() {
            let nnz = (0..pair.cols())
                .filter(|&j| pair.row_map[(pair.main_index(i, j), i)] != 0.0)
                .count();
            assert_eq!(nnz, 1);
        }
    }

    #[test]
    fn garbage_is_outside_the_main_register() {
        let mdp = lake();
        let pair = build_oracle_pair_p(&mdp).unwrap();
        let main = pair.main_dim();
        // column j of col_map has main support only on |·, j⟩
        for j in 0..pair.cols() {
            for i in 0..pair.rows() {
                for jj in 0..pair.cols() {
                    if jj != j {
                        assert_eq!(pair.col_map[(pair.main_index(i, jj), j)], 0.0);
                    }
                }
            }
            let garbage: f64 = pair.col_map.column(j).rows(main, pair.col_map.nrows() - main).norm_squared();
            let encoded: f64 = pair.col_map.column(j).rows(0, main).norm_squared();
            assert!((garbage + encoded - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_encoding_is_exact() {
        let id = DMatrix::identity(5, 5);
        let pair = build_oracle_pair(&id, 0.5, None, None).unwrap();
        let report = reconstruct_block(&pair, &id).unwrap();
        assert_eq!(report.mu, 1.0);
        assert_eq!(report.reconstruction_error, 0.0);
        assert_eq!(report.kappa, 1.0);
    }

    #[test]
    fn tabular_features_with_declared_sqrt_k() {
        let k = 16;
        let phi = DMatrix::identity(k, k);
        let pair = build_oracle_pair_features(&phi, Some((k as f64).sqrt())).unwrap();
        assert!(pair.isometry_error() < ENCODING_TOL);
        let block = pair.block();
        assert!((block - &phi / (k as f64).sqrt()).amax() < ENCODING_TOL);
        // the tight normalization is 1 for tabular features
        let tight = build_oracle_pair_features(&phi, None).unwrap();
        assert_eq!(tight.mu(), 1.0);
    }

    #[test]
    fn bounds_below_tight_are_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 1.0, 0.0]);
        assert!(build_oracle_pair(&a, 0.5, Some(1.0), Some(1.0)).is_err());
        assert!(build_oracle_pair(&a, 0.5, None, None).is_ok());
        let neg = DMatrix::from_row_slice(1, 2, &[-0.5, 0.5]);
        assert!(build_oracle_pair(&neg, 0.5, None, None).is_err());
        assert!(build_oracle_pair(&neg, 1.0, None, None).is_ok());
    }

    #[test]
    fn projection_matrix() {
        let pol = Policy::Deterministic(vec![1, 0, 2]);
        let pi = build_projection_pi(&pol, 3, 3).unwrap();
        assert_eq!(pi.iter().filter(|v| **v != 0.0).count(), 3);
        assert!(pi.iter().all(|v| *v == 0.0 || *v == 1.0));
        let mdp = lake();
        let pol = Policy::uniform(16, 4);
        assert!(projection_identity_error(&mdp, &pol).unwrap() <= 1e-12);
    }

    #[test]
    fn policy_transition_mu_is_policy_independent() {
        let mdp = lake();
        let cp = compute_cp(&mdp);
        for pol in [Policy::uniform(16, 4), Policy::Deterministic(vec![2; 16])] {
            let enc = policy_transition_encoding(&mdp, &pol).unwrap();
            let target = build_policy_transition(&mdp, &pol).unwrap().matrix;
            let report = enc.report(&target).unwrap();
            assert!(report.reconstruction_error < ENCODING_TOL);
            assert!((report.mu - cp.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_combination_normalization() {
        let mdp = lake();
        let pol = Policy::uniform(16, 4);
        let enc = evaluation_matrix_encoding(&mdp, &pol).unwrap();
        let mu_p = compute_cp(&mdp).sqrt();
        assert!((enc.mu - (1.0 + 0.9 * mu_p)).abs() < 1e-12);
        let target = build_policy_transition(&mdp, &pol).unwrap().evaluation_matrix(0.9);
        assert!(enc.report(&target).unwrap().reconstruction_error < ENCODING_TOL);
    }

    #[test]
    fn identity_products() {
        let id = BlockEncoding::identity(4);
        let prod = combine_encodings(&[id.clone(), id], &Combination::Product).unwrap();
        let r = prod.report(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!((r.mu, r.reconstruction_error), (1.0, 0.0));
        assert!(combine_encodings(&[], &Combination::Product).is_err());
        let bad = combine_encodings(
            &[BlockEncoding::identity(2), BlockEncoding::identity(3)],
            &Combination::Product,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn condition_numbers() {
        assert_eq!(condition_number(&DMatrix::identity(3, 3), None).unwrap(), 1.0);
        assert!(condition_number(&DMatrix::zeros(2, 2), None).is_err());
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-6, 0.5]));
        assert!((condition_number(&a, None).unwrap() - 1e6).abs() < 1e-3);
        assert!(condition_number(&a, Some(1e-3)).unwrap() <= 1000.0 + 1e-9);
        let mdp = lake();
        let m = build_policy_transition(&mdp, &Policy::uniform(16, 4))
            .unwrap()
            .evaluation_matrix(0.9);
        // P^π is not normal, so κ exceeds (1+γ)/(1-γ) = 19 here; reference
        // value from an independent numpy SVD.
        assert!((condition_number(&m, None).unwrap() - 26.809_755_523).abs() < 1e-6);
    }

    #[test]
    fn clipped_solve_matches_lu_when_well_conditioned() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let x = clipped_solve(&a, &[1.0, 2.0], 1e-3, SystemKind::Generic).unwrap();
        let lu = a.lu().solve(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!((x[0] - lu[0]).abs() < 1e-12 && (x[1] - lu[1]).abs() < 1e-12);
    }

    #[test]
    fn dense_cap_enforced() {
        let big = DMatrix::zeros(1100, 1000);
        assert!(matches!(
            build_oracle_pair(&big, 1.0, None, None),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn evaluation_cost_example() {
        let model = CostModel {
            mu_ppi: Some(2.0),
            t_ppi: Some(1.0),
            t_r: Some(1.0),
            discount: Some(0.9),
            epsilon: Some(1e-2),
            ..Default::default()
        };
        let cost = estimate_cost(&model, CostFormula::QuantumEvaluation).unwrap();
        assert!((cost - 30.0 * 1000f64.ln()).abs() < 1e-9);
        let short = CostModel { discount: Some(0.0), ..model.clone() };
        assert!(estimate_cost(&short, CostFormula::QuantumEvaluation).unwrap() < cost);
        let missing = CostModel { t_r: None, ..model };
        assert!(matches!(
            estimate_cost(&missing, CostFormula::QuantumEvaluation),
            Err(Error::MissingParameter("t_r"))
        ));
    }

    #[test]
    fn classical_costs() {
        let model = CostModel {
            num_states: Some(64.0),
            num_actions: Some(4.0),
            num_features: Some(10.0),
            omega: Some(3.0),
            ..Default::default()
        };
        assert_eq!(estimate_cost(&model, CostFormula::ClassicalPi).unwrap(), 16_777_216.0);
        assert_eq!(estimate_cost(&model, CostFormula::ClassicalLspi).unwrap(), 256.0 * 100.0 + 1000.0);
    }

    #[test]
    fn lstdq_matrix_encoding_normalization() {
        let mdp = lake();
        let pol = Policy::uniform(16, 4);
        let phi = DMatrix::identity(64, 64);
        let phi_enc = build_oracle_pair_features(&phi, Some(8.0)).unwrap().encoding();
        let a = evaluation_matrix_encoding(&mdp, &pol).unwrap();
        let full = combine_encodings(
            &[phi_enc.transpose(), a.clone(), phi_enc.clone()],
            &Combination::Product,
        )
        .unwrap();
        assert!((full.mu - 64.0 * a.mu).abs() < 1e-9);
        let target = phi.transpose() * build_policy_transition(&mdp, &pol).unwrap().evaluation_matrix(0.9) * &phi;
        assert!(full.report(&target).unwrap().reconstruction_error < 1e-9);
    }
}
