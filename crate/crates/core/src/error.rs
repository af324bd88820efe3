use thiserror::Error;

/// Which linear system a solve belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// `(I - γP^π) Q = R`
    Evaluation,
    /// The least-squares weight system `A^π w = b`.
    Weights,
    /// A system supplied directly by the caller.
    Generic,
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SystemKind::Evaluation => write!(f, "evaluation"),
            SystemKind::Weights => write!(f, "weights"),
            SystemKind::Generic => write!(f, "generic"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("map parse error at line {line}, column {column}: {message}")]
    MapParse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("singular {0} system")]
    Singular(SystemKind),
    #[error("dense construction of dimension {dim} exceeds the cap of {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("missing cost-model parameter `{0}`")]
    MissingParameter(&'static str),
    #[error("policy iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short stable identifier, used on the CLI's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidMdp(_) => "invalid_mdp",
            Error::InvalidPolicy(_) => "invalid_policy",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::MapParse { .. } => "map_parse",
            Error::Singular(_) => "singular",
            Error::TooLarge { .. } => "too_large",
            Error::MissingParameter(_) => "missing_parameter",
            Error::NotConverged { .. } => "not_converged",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
