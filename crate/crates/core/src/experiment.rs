//! Seeded batch runs driven by a flat TOML config.
//!
//! Every run writes `run_<seed>.csv` per seed, an aggregated `summary.csv`
//! and `meta.txt`. Timestamps and wall-clock times only go to `meta.txt`, so
//! the CSV files are byte-identical across reruns of the same config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::blockenc::{
    build_oracle_pair, build_oracle_pair_features, build_oracle_pair_p, build_oracle_pair_pi,
    build_projection_pi, compute_cp, condition_number, estimate_cost, policy_transition_encoding,
    CostFormula, CostModel, COST_MODEL_NOTE, ENCODING_TOL,
};
use crate::env::frozenlake::{frozenlake_to_mdp, generate_diagonal_map, parse_map, FrozenLakeSpec, MAP_4X4};
use crate::env::pendulum::{collect_samples, PendulumParams, SampleSource};
use crate::error::{Error, Result};
use crate::mdp::{build_policy_transition, Mdp, Policy};
use crate::qapi::{balancing_curve, run_qapi, FeatureMap, QapiConfig, QapiEnvironment, SampleFeatures, Strategy};
use crate::qpi::{check_suboptimality_bounds, run_qpi, QpiConfig, Sampling, Shots};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    RunQpi,
    RunQapi,
    VerifyBlockenc,
    CostReport,
    CollectSamples,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RunQpi => "run-qpi",
            Command::RunQapi => "run-qapi",
            Command::VerifyBlockenc => "verify-blockenc",
            Command::CostReport => "cost-report",
            Command::CollectSamples => "collect-samples",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "run-qpi" => Ok(Command::RunQpi),
            "run-qapi" => Ok(Command::RunQapi),
            "verify-blockenc" => Ok(Command::VerifyBlockenc),
            "cost-report" => Ok(Command::CostReport),
            "collect-samples" => Ok(Command::CollectSamples),
            other => Err(Error::Config(format!("unknown command `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ShotsSetting {
    Count(u64),
    Named(String),
}

/// Flat experiment configuration. Unset keys take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `frozenlake` or `pendulum`.
    pub environment: Option<String>,
    /// Built-in map (`4x4`, `diagonal-<n>`) or inline rows separated by `/`.
    pub map: Option<String>,
    /// Map file; relative paths resolve against the config file.
    pub map_file: Option<PathBuf>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    /// Integer or `"auto"`.
    pub shots: Option<ShotsSetting>,
    pub iterations: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    /// `global`, `tomography` or `per-state`.
    pub strategy: Option<String>,
    pub clip: Option<f64>,
    pub degree: Option<usize>,
    pub samples: Option<usize>,
    /// Pre-collected transition samples (CSV); overrides `samples`.
    pub samples_file: Option<PathBuf>,
    pub cached_weights: Option<bool>,
    pub early_stop: Option<bool>,
    /// `mixture` or `per-shot`.
    pub sampling: Option<String>,
    pub episodes: Option<usize>,
    pub max_steps: Option<usize>,
    pub success_steps: Option<f64>,
    pub timestep_s: Option<f64>,
    pub force_noise_n: Option<f64>,
    pub omega: Option<f64>,
    pub num_features: Option<f64>,
    pub oracle_cost: Option<f64>,
    pub policies: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))
    }

    fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(1e-2)
    }

    fn gamma(&self, default: f64) -> f64 {
        self.gamma.unwrap_or(default)
    }

    fn shots(&self) -> Result<Shots> {
        match &self.shots {
            None => Ok(Shots::Auto),
            Some(ShotsSetting::Named(s)) if s == "auto" => Ok(Shots::Auto),
            Some(ShotsSetting::Named(s)) => Err(Error::Config(format!("shots must be an integer or \"auto\", got `{s}`"))),
            Some(ShotsSetting::Count(0)) => Err(Error::Config("shots must be at least 1".into())),
            Some(ShotsSetting::Count(m)) => Ok(Shots::Fixed(*m)),
        }
    }

    fn environment(&self, default: &str) -> Result<String> {
        let env = self.environment.clone().unwrap_or_else(|| default.to_string());
        match env.as_str() {
            "frozenlake" | "pendulum" => Ok(env),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }

    fn pendulum_params(&self) -> Result<PendulumParams> {
        let mut p = PendulumParams::default();
        if let Some(dt) = self.timestep_s {
            p.timestep = dt;
        }
        if let Some(n) = self.force_noise_n {
            if !(n >= 0.0) {
                return Err(Error::Config("force_noise_n must be non-negative".into()));
            }
            p.noise_half_width = n;
        }
        p.validate()?;
        Ok(p)
    }
}

/// A validated config with its source location and hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    /// SHA-256 of the config file contents, hex.
    pub hash: String,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&text, base_dir)
    }

    pub fn from_text(text: &str, base_dir: PathBuf) -> Result<Self> {
        let config = ExperimentConfig::parse(text)?;
        let hash = hex(&Sha256::digest(text.as_bytes()));
        let loaded = Self { config, base_dir, hash };
        for file in [&loaded.config.map_file, &loaded.config.samples_file].into_iter().flatten() {
            let p = loaded.resolve(file);
            if !p.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(loaded)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn map(&self) -> Result<FrozenLakeSpec> {
        if let Some(file) = &self.config.map_file {
            return parse_map(&fs::read_to_string(self.resolve(file))?);
        }
        let name = self.config.map.as_deref().unwrap_or("4x4");
        if name == "4x4" {
            parse_map(MAP_4X4)
        } else if let Some(n) = name.strip_prefix("diagonal-") {
            let n = n
                .parse()
                .map_err(|_| Error::Config(format!("bad diagonal map size in `{name}`")))?;
            generate_diagonal_map(n)
        } else {
            parse_map(name)
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Hash of a policy's action table, 16 hex digits.
pub fn policy_hash(policy: &Policy, num_actions: usize) -> String {
    let mut h = Sha256::new();
    for s in 0..policy.num_states() {
        for a in 0..num_actions {
            h.update(policy.prob(s, a).to_le_bytes());
        }
    }
    hex(&h.finalize()[..8])
}

/// A CSV cell: a plain decimal number or a quoted string.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_number(*x),
            Cell::Text(s) => format!("\"{}\"", s.replace('"', "\"\"")),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map(Into::into).unwrap_or_else(|| Cell::Text(String::new()))
    }
}

/// Shortest round-trip decimal (at most 17 significant digits), never in
/// exponent notation. Non-finite values become quoted strings.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return format!("\"{x}\"");
    }
    if x == 0.0 {
        return "0".into();
    }
    format!("{x}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Outcome of one seed.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub metrics: Table,
    /// Iteration at which the run first met its success criterion.
    pub convergence_iteration: Option<usize>,
    pub success: bool,
    pub max_tomography_error: Option<f64>,
    /// Fraction of checked bound windows that held.
    pub bound_holds_rate: Option<f64>,
    /// Extra `key = value` lines for `meta.txt`.
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub wall_clock_s: f64,
}

impl RunRecord {
    fn failed(seed: u64, err: &Error) -> Self {
        Self {
            seed,
            metrics: Table::default(),
            convergence_iteration: None,
            success: false,
            max_tomography_error: None,
            bound_holds_rate: None,
            notes: Vec::new(),
            error: Some(err.to_string()),
            wall_clock_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub median_convergence_iteration: Option<f64>,
    pub max_tomography_error: Option<f64>,
    pub bound_holds_rate: Option<f64>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub fn summarize(records: &[RunRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("nothing to summarize".into()));
    }
    let successes = records.iter().filter(|r| r.success).count();
    let fold_max = |it: &mut dyn Iterator<Item = f64>| it.reduce(f64::max);
    let rates: Vec<f64> = records.iter().filter_map(|r| r.bound_holds_rate).collect();
    Ok(Summary {
        runs: records.len(),
        successes,
        success_rate: successes as f64 / records.len() as f64,
        median_convergence_iteration: median(
            records
                .iter()
                .filter_map(|r| r.convergence_iteration.map(|i| i as f64))
                .collect(),
        ),
        max_tomography_error: fold_max(&mut records.iter().filter_map(|r| r.max_tomography_error)),
        bound_holds_rate: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
    })
}

/// Runs `command` for every seed and writes the artifacts into `out_dir`.
pub fn run(
    command: Command,
    loaded: &LoadedConfig,
    out_dir: &Path,
    seeds: Option<Vec<u64>>,
) -> Result<(Vec<RunRecord>, Summary)> {
    let seeds = seeds
        .or_else(|| loaded.config.seeds.clone())
        .unwrap_or_else(|| vec![1]);
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    validate(command, loaded)?;
    fs::create_dir_all(out_dir)?;
    let started = SystemTime::now();

    let records: Vec<RunRecord> = seeds
        .par_iter()
        .map(|&seed| {
            let t0 = Instant::now();
            let mut rec = run_seed(command, loaded, seed, out_dir).unwrap_or_else(|e| RunRecord::failed(seed, &e));
            rec.wall_clock_s = t0.elapsed().as_secs_f64();
            rec
        })
        .collect();
    for rec in &records {
        if rec.error.is_none() {
            fs::write(out_dir.join(format!("run_{}.csv", rec.seed)), rec.metrics.to_csv())?;
        }
    }
    let summary = summarize(&records)?;
    fs::write(out_dir.join("summary.csv"), summary_csv(&records, &summary))?;
    fs::write(out_dir.join("meta.txt"), meta_text(command, loaded, &records, started))?;
    Ok((records, summary))
}

fn validate(command: Command, loaded: &LoadedConfig) -> Result<()> {
    let c = &loaded.config;
    if let Some(eps) = c.epsilon {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("epsilon {eps} outside (0, 1)")));
        }
    }
    if let Some(g) = c.gamma {
        if !(0.0..1.0).contains(&g) {
            return Err(Error::Config(format!("gamma {g} outside [0, 1)")));
        }
    }
    c.shots()?;
    if let Some(s) = &c.strategy {
        Strategy::from_str(s)?;
    }
    if let Some(s) = &c.sampling {
        sampling(s)?;
    }
    let needs_map = matches!(command, Command::RunQpi | Command::VerifyBlockenc);
    if needs_map && c.environment("frozenlake")? != "frozenlake" {
        return Err(Error::Config(format!("{} needs the frozenlake environment", command.name())));
    }
    if command == Command::CollectSamples && c.environment("pendulum")? != "pendulum" {
        return Err(Error::Config("collect-samples needs the pendulum environment".into()));
    }
    if needs_map || c.environment("frozenlake")? == "frozenlake" {
        loaded.map()?;
    }
    Ok(())
}

fn sampling(s: &str) -> Result<Sampling> {
    match s {
        "mixture" => Ok(Sampling::Mixture),
        "per-shot" | "per_shot" => Ok(Sampling::PerShot),
        other => Err(Error::Config(format!("unknown sampling mode `{other}`"))),
    }
}

fn run_seed(command: Command, loaded: &LoadedConfig, seed: u64, out_dir: &Path) -> Result<RunRecord> {
    match command {
        Command::RunQpi => seed_qpi(loaded, seed),
        Command::RunQapi => seed_qapi(loaded, seed),
        Command::VerifyBlockenc => seed_blockenc(loaded, seed),
        Command::CostReport => seed_cost(loaded, seed),
        Command::CollectSamples => seed_collect(loaded, seed, out_dir),
    }
}

fn base_record(seed: u64, metrics: Table) -> RunRecord {
    RunRecord {
        seed,
        metrics,
        convergence_iteration: None,
        success: false,
        max_tomography_error: None,
        bound_holds_rate: None,
        notes: Vec::new(),
        error: None,
        wall_clock_s: 0.0,
    }
}

fn frozenlake(loaded: &LoadedConfig) -> Result<Mdp> {
    frozenlake_to_mdp(&loaded.map()?, loaded.config.gamma(0.9))
}

fn seed_qpi(loaded: &LoadedConfig, seed: u64) -> Result<RunRecord> {
    let c = &loaded.config;
    let mdp = frozenlake(loaded)?;
    let mut qc = QpiConfig::new(c.epsilon(), c.iterations.unwrap_or(5), seed);
    qc.shots = c.shots()?;
    qc.early_stop = c.early_stop.unwrap_or(false);
    qc.sampling = c.sampling.as_deref().map(sampling).transpose()?.unwrap_or(Sampling::Mixture);
    let trace = run_qpi(&mdp, &qc)?;
    let checks = check_suboptimality_bounds(&trace)?;

    let mut t = Table::new(vec![
        "iteration",
        "policy_hash",
        "tomography_error_sup",
        "rho_gap",
        "next_policy_hash",
        "next_sup_gap",
        "bound_lhs",
        "bound_rhs",
        "bound_holds",
        "bound_vacuous",
    ]);
    let na = mdp.num_actions();
    let len = trace.records.len();
    for r in &trace.records {
        // the window ending at the last iteration that starts here
        let check = &checks[len - r.iteration];
        t.push(vec![
            r.iteration.into(),
            policy_hash(&r.policy, na).into(),
            r.tomography_error.into(),
            r.rho_gap.into(),
            policy_hash(&r.next_policy, na).into(),
            r.next_sup_gap.into(),
            check.lhs.into(),
            check.rhs.into(),
            check.holds.into(),
            check.vacuous.into(),
        ]);
    }
    let mut rec = base_record(seed, t);
    rec.convergence_iteration = trace.convergence_iteration();
    rec.success = rec.convergence_iteration.is_some();
    rec.max_tomography_error = trace.records.iter().map(|r| r.tomography_error).reduce(f64::max);
    rec.bound_holds_rate = Some(checks.iter().filter(|c| c.holds).count() as f64 / checks.len() as f64);
    rec.notes.push(format!("shots = {}", trace.shots));
    if checks.iter().any(|c| c.vacuous) {
        rec.notes.push("bound_vacuous = rhs >= 2/sqrt(SA) on at least one window".into());
    }
    Ok(rec)
}

fn seed_qapi(loaded: &LoadedConfig, seed: u64) -> Result<RunRecord> {
    let c = &loaded.config;
    let env = c.environment("pendulum")?;
    let strategy = c.strategy.as_deref().map(Strategy::from_str).transpose()?.unwrap_or(Strategy::PerState);
    let mut qc = QapiConfig::new(c.epsilon(), c.iterations.unwrap_or(8), seed, strategy);
    qc.shots = match (&c.shots, env.as_str()) {
        (None, "pendulum") => Shots::Fixed(100),
        _ => c.shots()?,
    };
    qc.clip = c.clip.unwrap_or(1e-3);
    qc.cached_weights = c.cached_weights.unwrap_or(false);
    qc.early_stop = c.early_stop.unwrap_or(false);

    if env == "frozenlake" {
        let mdp = frozenlake(loaded)?;
        let phi = DMatrix::identity(mdp.num_pairs(), mdp.num_pairs());
        let trace = run_qapi(&QapiEnvironment::Finite { mdp: &mdp, phi: &phi }, &qc)?;
        let mut t = Table::new(vec!["iteration", "policy_hash", "kappa", "fallback_states", "next_sup_gap"]);
        for r in &trace.records {
            t.push(vec![
                r.iteration.into(),
                policy_hash(&r.next_policy, mdp.num_actions()).into(),
                r.kappa.into(),
                r.fallback_states.into(),
                r.next_sup_gap.into(),
            ]);
        }
        let mut rec = base_record(seed, t);
        rec.convergence_iteration = trace
            .records
            .iter()
            .find(|r| r.next_sup_gap.is_some_and(|g| g <= crate::qpi::OPTIMALITY_TOL))
            .map(|r| r.iteration);
        rec.success = rec.convergence_iteration.is_some();
        return Ok(rec);
    }

    let params = c.pendulum_params()?;
    let source = match &c.samples_file {
        Some(f) => SampleSource::read_csv(std::io::BufReader::new(fs::File::open(loaded.resolve(f))?))?,
        None => collect_samples(&params, c.samples.unwrap_or(5000), seed)?,
    };
    let map = FeatureMap::pendulum(c.degree.unwrap_or(4))?;
    let features = SampleFeatures::new(&source, &map)?;
    let discount = c.gamma(0.95);
    let trace = run_qapi(
        &QapiEnvironment::Samples {
            features: &features,
            map: &map,
            discount,
        },
        &qc,
    )?;
    let episodes = c.episodes.unwrap_or(10);
    let max_steps = c.max_steps.unwrap_or(3000);
    let threshold = c.success_steps.unwrap_or(max_steps as f64);
    let curve = balancing_curve(&trace, &params, &map, episodes, max_steps, seed.wrapping_add(0x5eed))?;
    let mut t = Table::new(vec![
        "iteration",
        "policy_hash",
        "mean_balancing_steps",
        "kappa",
        "feature_scale",
        "rank_deficient",
        "fallback_states",
    ]);
    for (r, steps) in trace.records.iter().zip(&curve) {
        t.push(vec![
            r.iteration.into(),
            policy_hash(&r.next_policy, map.num_actions).into(),
            (*steps).into(),
            r.kappa.into(),
            r.feature_scale.into(),
            r.rank_deficient.into(),
            r.fallback_states.into(),
        ]);
    }
    let mut rec = base_record(seed, t);
    rec.convergence_iteration = trace
        .records
        .iter()
        .zip(&curve)
        .find(|(_, s)| **s >= threshold)
        .map(|(r, _)| r.iteration);
    rec.success = rec.convergence_iteration.is_some();
    rec.notes.push(format!("samples = {}", source.len()));
    rec.notes.push(format!("terminal_fraction = {}", format_number(source.terminal_fraction())));
    Ok(rec)
}

fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Result<Policy> {
    let mut probs = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        let row: Vec<f64> = (0..na).map(|_| rng.random::<f64>() + 1e-3).collect();
        let sum: f64 = row.iter().sum();
        probs.extend(row.iter().map(|p| p / sum));
    }
    Policy::stochastic(ns, na, probs)
}

fn seed_blockenc(loaded: &LoadedConfig, seed: u64) -> Result<RunRecord> {
    let mdp = frozenlake(loaded)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Table::new(vec!["object", "mu", "reconstruction_error", "isometry_error", "kappa", "ok"]);
    let mut all_ok = true;
    let mut push = |t: &mut Table, name: String, mu: f64, err: f64, iso: Option<f64>, kappa: f64| {
        let ok = err <= ENCODING_TOL && iso.is_none_or(|i| i <= ENCODING_TOL);
        all_ok &= ok;
        t.push(vec![name.into(), mu.into(), err.into(), iso.into(), kappa.into(), ok.into()]);
    };

    let p = mdp.transition_matrix();
    let pair = build_oracle_pair_p(&mdp)?;
    let r = pair.encoding().report(&p)?;
    push(&mut t, "P".into(), r.mu, r.reconstruction_error, Some(pair.isometry_error()), r.kappa);

    let mut mus = Vec::new();
    for i in 0..loaded.config.policies.unwrap_or(3) {
        let pol = random_policy(&mut rng, ns, na)?;
        let pi = build_projection_pi(&pol, ns, na)?;
        let pair = build_oracle_pair_pi(&pol, ns, na)?;
        let r = pair.encoding().report(&pi)?;
        push(&mut t, format!("Pi[{i}]"), r.mu, r.reconstruction_error, Some(pair.isometry_error()), r.kappa);
        let enc = policy_transition_encoding(&mdp, &pol)?;
        let r = enc.report(&build_policy_transition(&mdp, &pol)?.matrix)?;
        mus.push(r.mu);
        push(&mut t, format!("Ppi[{i}]"), r.mu, r.reconstruction_error, None, r.kappa);
    }
    let n = mdp.num_pairs();
    let phi = DMatrix::identity(n, n);
    let pair = build_oracle_pair_features(&phi, Some((n as f64).sqrt()))?;
    let r = pair.encoding().report(&phi)?;
    push(&mut t, "Phi_tabular".into(), r.mu, r.reconstruction_error, Some(pair.isometry_error()), r.kappa);
    let direct = build_oracle_pair(&p, 0.5, None, None)?;
    let spread = mus.iter().cloned().fold(f64::MIN, f64::max) - mus.iter().cloned().fold(f64::MAX, f64::min);

    let mut rec = base_record(seed, t);
    rec.success = all_ok && spread <= 1e-9;
    rec.notes.push(format!("c_P = {}", format_number(compute_cp(&mdp))));
    rec.notes.push(format!("mu_Ppi_spread = {}", format_number(spread.max(0.0))));
    rec.notes.push(format!("tight_mu_P = {}", format_number(direct.mu())));
    Ok(rec)
}

fn seed_cost(loaded: &LoadedConfig, seed: u64) -> Result<RunRecord> {
    let c = &loaded.config;
    let mdp = frozenlake(loaded)?;
    let unit = c.oracle_cost.unwrap_or(1.0);
    let n = mdp.num_pairs() as f64;
    let k = c.num_features.unwrap_or(n);
    let uniform = build_policy_transition(&mdp, &Policy::uniform(mdp.num_states(), mdp.num_actions()))?;
    let model = CostModel {
        t_p: Some(unit),
        t_ppi: Some(unit),
        t_r: Some(unit),
        t_pi: Some(unit),
        t_phi: Some(unit),
        t_phi_tilde: Some(unit),
        t_r_tilde: Some(unit),
        num_states: Some(mdp.num_states() as f64),
        num_actions: Some(mdp.num_actions() as f64),
        num_features: Some(k),
        num_samples: c.samples.map(|d| d as f64),
        discount: Some(mdp.discount()),
        epsilon: Some(c.epsilon()),
        mu_ppi: Some(compute_cp(&mdp).sqrt()),
        mu_phi: Some(k.sqrt()),
        mu_phi_tilde: Some(k.sqrt()),
        kappa_phi: Some(1.0),
        kappa_phi_tilde: Some(1.0),
        omega: Some(c.omega.unwrap_or(2.373)),
    };
    let mut t = Table::new(vec!["formula", "value"]);
    for f in CostFormula::ALL {
        t.push(vec![f.name().into(), estimate_cost(&model, f)?.into()]);
    }
    t.push(vec!["kappa_evaluation_uniform".into(), condition_number(&uniform.evaluation_matrix(mdp.discount()), None)?.into()]);
    t.push(vec!["note".into(), COST_MODEL_NOTE.into()]);
    let mut rec = base_record(seed, t);
    rec.success = true;
    rec.notes.push(format!("cost_model = {COST_MODEL_NOTE}"));
    Ok(rec)
}

fn seed_collect(loaded: &LoadedConfig, seed: u64, out_dir: &Path) -> Result<RunRecord> {
    let c = &loaded.config;
    let params = c.pendulum_params()?;
    let count = c.samples.unwrap_or(5000);
    let source = collect_samples(&params, count, seed)?;
    let file = out_dir.join(format!("samples_{seed}.csv"));
    source.write_csv(std::io::BufWriter::new(fs::File::create(&file)?))?;
    let episodes = source.samples().iter().filter(|s| s.terminal).count();
    let mut t = Table::new(vec!["samples", "terminal_fraction", "completed_episodes", "file"]);
    t.push(vec![
        source.len().into(),
        source.terminal_fraction().into(),
        episodes.into(),
        format!("samples_{seed}.csv").into(),
    ]);
    let mut rec = base_record(seed, t);
    rec.success = true;
    Ok(rec)
}

fn summary_csv(records: &[RunRecord], summary: &Summary) -> String {
    let mut t = Table::new(vec![
        "seed",
        "success",
        "convergence_iteration",
        "max_tomography_error",
        "bound_holds_rate",
        "error",
    ]);
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.seed);
    for r in sorted {
        t.push(vec![
            Cell::Int(r.seed as i64),
            r.success.into(),
            r.convergence_iteration.into(),
            r.max_tomography_error.into(),
            r.bound_holds_rate.into(),
            r.error.clone().unwrap_or_default().into(),
        ]);
    }
    t.push(vec![
        "all".into(),
        summary.success_rate.into(),
        summary.median_convergence_iteration.into(),
        summary.max_tomography_error.into(),
        summary.bound_holds_rate.into(),
        format!("{}/{} succeeded", summary.successes, summary.runs).into(),
    ]);
    t.to_csv()
}

fn meta_text(command: Command, loaded: &LoadedConfig, records: &[RunRecord], started: SystemTime) -> String {
    let ts = started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "timestamp_unix_s = {ts}");
    let _ = writeln!(out, "config_sha256 = {}", loaded.hash);
    let _ = writeln!(out, "command = {}", command.name());
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.seed);
    for r in sorted {
        let _ = writeln!(out, "[seed {}]", r.seed);
        let _ = writeln!(out, "wall_clock_s = {:.3}", r.wall_clock_s);
        if let Some(e) = &r.error {
            let _ = writeln!(out, "error = {e}");
        }
        for n in &r.notes {
            let _ = writeln!(out, "{n}");
        }
    }
    out
}
