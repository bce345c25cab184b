use std::path::PathBuf;

use crate::oracle::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("finite-difference evaluation of parameter {param} entry {index} is not finite")]
    NonFiniteProbe { param: String, index: usize },

    #[error("gradient of parameter `{0}` contains NaN")]
    NanGradient(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("missing label for group {group_id} sample {sample_index}")]
    MissingLabel { group_id: u32, sample_index: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("inadmissible level-set threshold c = {c}: occupancy is {what}")]
    InadmissibleThreshold { c: f64, what: &'static str },

    #[error("conjugate gradients did not converge ({} iterations, residual {:.3e})", .0.iterations, .0.final_residual_norm)]
    NotConverged(SolveReport),

    #[error("refusing to overwrite existing {0} (pass --overwrite)")]
    WouldOverwrite(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }
}
