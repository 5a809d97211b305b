use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid loading profile: {0}")]
    InvalidProfile(String),

    #[error("function is decreasing at z = {at} (slope {slope:e})")]
    NonMonotone { at: f64, slope: f64 },

    #[error("elastic modulus is not positive at y = {at} (E = {value:e})")]
    NonPositiveModulus { at: f64, value: f64 },

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("incompatible data: {0}")]
    IncompatibleData(String),

    #[error("damage lower bound outside [0, 1] at node {node} (value {value})")]
    InvalidBound { node: usize, value: f64 },

    #[error("history below slip at node {node}: gamma = {gamma:e}, delta = {delta:e}")]
    HistoryBelowSlip { node: usize, gamma: f64, delta: f64 },

    #[error("field length {found} does not match mesh with {expected} nodes")]
    FieldLength { expected: usize, found: usize },

    #[error("oracle problem has {found} free coordinates, cap is {cap}")]
    OracleTooLarge { found: usize, cap: usize },

    #[error("invalid load program: {0}")]
    InvalidLoad(String),

    #[error("configuration has {} problem(s): {}", .0.len(), join_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("malformed data file {path}: {message}")]
    Format { path: String, message: String },

    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One validation problem in a run configuration, keyed by its dotted path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
