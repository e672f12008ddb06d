use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("graph is disconnected; unreachable buses: {0:?}")]
    Disconnected(Vec<String>),

    #[error("topology is not radial ({lines} lines for {buses} buses); power flow needs a radial feeder, use export-only mode")]
    NotRadial { buses: usize, lines: usize },

    #[error("log-posterior is not finite at the initial point of chain {chain}")]
    Initialization { chain: usize },

    #[error("too few draws: need at least {needed}, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("{file}:{line}: field `{field}`: {message}")]
    Ingest {
        file: PathBuf,
        line: u64,
        field: String,
        message: String,
    },

    #[error("zone count mismatch: model was fitted with {model} zones, topology uses {topology}")]
    ZoneMismatch { model: usize, topology: usize },

    #[error("incomplete sample: {0}")]
    IncompleteSample(String),

    #[error("no converged power-flow results to summarize")]
    NoConvergedResults,

    #[error("config: {0}")]
    Config(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
