use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("cutoff index {cutoff} out of range 1..={n}")]
    CutoffOutOfRange { cutoff: usize, n: usize },

    #[error(
        "oversampling factor {n_factor} gives stride {stride} grid points, which is not an integer; \
         nearest admissible factors: {nearest:?}"
    )]
    InadmissibleStride {
        n_factor: usize,
        stride: f64,
        nearest: Vec<usize>,
    },

    #[error("single-bit acquisition requires a positive dither variance")]
    MissingDither,

    #[error("quantizer mismatch: expected {expected}, found {found}")]
    QuantizerMismatch { expected: String, found: String },

    #[error("CDF model variance {model} does not match acquisition variance {acquired}")]
    VarianceMismatch { model: f64, acquired: f64 },

    #[error("incompatible sample lattice: {0}")]
    IncompatibleLattice(String),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("sweep cell (N={n_factor}, quantizer={quantizer}, seed={seed}) failed: {source}")]
    Cell {
        n_factor: usize,
        quantizer: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }
}
