use std::path::PathBuf;

use lp_kernel::LpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid file is missing required field `{0}`")]
    MissingField(&'static str),
    #[error("grid field `{field}` has length {got}, expected {expected}")]
    Dimension {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("grid field `{field}` is invalid: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("network is disconnected: bus {0} cannot be reached from the reference bus")]
    Disconnected(usize),
    #[error("reduced susceptance matrix is singular")]
    Singular,
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("grid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("load {load:.3} MW exceeds total capacity {capacity:.3} MW")]
    InsufficientCapacity { load: f64, capacity: f64 },
    #[error("unit commitment is infeasible (load {load:.3} MW, capacity {capacity:.3} MW)")]
    UcInfeasible { load: f64, capacity: f64 },
    #[error("dispatch with the given commitment is infeasible")]
    DispatchInfeasible,
    #[error("reserve requirements cannot be met")]
    ReserveInfeasible,
    #[error("multi-period clearing is infeasible; first infeasible hour is {hour}")]
    HorizonInfeasible { hour: usize },
    #[error("{what}: expected {expected} entries, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("offer block {block} has zero width")]
    ZeroWidthBlock { block: usize },
    #[error("invalid offer configuration: {0}")]
    Config(String),
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("dataset JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Market(#[from] MarketError),
}

#[derive(Debug, Error)]
pub enum InverseError {
    #[error("norm exponent p must be at least 1, got {0}")]
    BadNorm(f64),
    #[error("invalid gradient-descent configuration: {0}")]
    Config(String),
    #[error("{what}: expected {expected} entries, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("generator-bus incidence column {0} does not sum to one")]
    Incidence(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

pub(crate) fn io_error(path: &std::path::Path, source: std::io::Error) -> ScenarioError {
    ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Inverse(#[from] InverseError),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
}
