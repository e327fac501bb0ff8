use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid distribution row {row}: {reason}")]
    InvalidDistribution { row: usize, reason: String },

    #[error("node {node} out of range for a network on {n} individuals")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("edge ({0}, {1}) is not in the network")]
    EdgeAbsent(usize, usize),

    #[error("edge ({0}, {1}) is already in the network")]
    EdgePresent(usize, usize),

    #[error("degree must be at least 1 (got {0})")]
    ZeroDegree(usize),

    #[error("node {node} is incident to a 3- or 4-cycle; use exact_utility_ipng instead of the product form")]
    ShortCycle { node: usize },

    #[error("radius-2 ball around node {node} has {size} individuals (cap {cap}); use Monte Carlo estimation")]
    BallTooLarge { node: usize, size: usize, cap: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("girth-5 construction failed after {attempts} attempts")]
    GirthRetryExhausted { attempts: usize },

    #[error("social welfare must be positive (got {0})")]
    NonPositiveWelfare(f64),

    #[error("n = {n} exceeds the exhaustive-enumeration limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("invariant breached: {0}")]
    InvariantBreach(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used on the command line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid-params",
            Error::InvalidDistribution { .. } => "invalid-distribution",
            Error::NodeOutOfRange { .. } => "node-out-of-range",
            Error::SelfLoop(_) => "self-loop",
            Error::EdgeAbsent(..) => "edge-absent",
            Error::EdgePresent(..) => "edge-present",
            Error::ZeroDegree(_) => "zero-degree",
            Error::ShortCycle { .. } => "short-cycle",
            Error::BallTooLarge { .. } => "ball-too-large",
            Error::Precondition(_) => "precondition",
            Error::Infeasible(_) => "infeasible",
            Error::GirthRetryExhausted { .. } => "girth-retry-exhausted",
            Error::NonPositiveWelfare(_) => "nonpositive-welfare",
            Error::TooLarge { .. } => "too-large",
            Error::SearchFailed(_) => "search-failed",
            Error::InvariantBreach(_) => "invariant-breach",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
