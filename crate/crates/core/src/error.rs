use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: lo = {lo} must be below hi = {hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncated sampling failed: {rejections} consecutive rejections on [{lo}, {hi}]")]
    SamplingFailure { lo: f64, hi: f64, rejections: u64 },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("gate targets must be distinct, got {0:?}")]
    InvalidTargets(Vec<usize>),

    #[error("Kraus operators are not trace preserving (max deviation {deviation:.3e})")]
    ChannelValidation { deviation: f64 },

    #[error("{n_qubits} qubits exceeds the density-matrix cap of {cap}")]
    Capacity { n_qubits: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("input out of range: {0}")]
    InputRange(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("label {label} outside [0, {n_classes})")]
    Label { label: usize, n_classes: usize },

    #[error("metric over an empty input")]
    EmptyMetric,

    #[error("gradient audit failed for draw {draw}: analytic {analytic:.3e}, finite difference {numeric:.3e}")]
    Audit { draw: usize, analytic: f64, numeric: f64 },

    #[error("premise violated: Var(a) + E[a]^2 = {value:.4} < 1")]
    Premise { value: f64 },

    #[error("paired runs disagree: {0}")]
    Pairing(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },

    #[error("checksum mismatch for {path}: expected {expected}, got {actual}")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint incompatible: {0}")]
    Compatibility(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("download failed: {0}")]
    Download(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
