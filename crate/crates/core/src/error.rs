use thiserror::Error;

/// Errors raised by graph construction, filtering and the approximation pipeline.
///
/// Node indices carried by variants are 0-based, as everywhere in the Rust API.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node {0} has no incident edges; D^(-1/2) is undefined")]
    IsolatedNode(usize),

    #[error("edge ({i}, {j}) has non-positive or non-finite weight {w}")]
    InvalidWeight { i: usize, j: usize, w: f64 },

    #[error("edge ({0}, {1}) is listed more than once")]
    DuplicateEdge(usize, usize),

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("node index {index} out of range for a graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of domain: {0}")]
    ParameterOutOfDomain(String),

    #[error("function returned non-finite value {value} at lambda = {lambda}")]
    NonFiniteSample { lambda: f64, value: f64 },

    #[error("K = {k} outside [1, {n}]")]
    KOutOfRange { k: usize, n: usize },

    #[error("rank deficient: column {0} has a vanishing residual")]
    RankDeficient(usize),

    #[error("N = {n} exceeds the dense oracle cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("graph is disconnected after {0} sampling attempts")]
    Disconnected(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("sweep has no settings")]
    EmptySweep,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_numeric(),
            Error::NonFiniteSample { .. }
            | Error::RankDeficient(_)
            | Error::AssumptionViolated(_)
            | Error::Disconnected(_) => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
