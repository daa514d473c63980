//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by operator algebra, comb composition and the optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch on label `{label}`: {left} vs {right}")]
    DimMismatch {
        label: String,
        left: usize,
        right: usize,
    },

    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    #[error("label list is not a permutation of the signature")]
    NotAPermutation,

    #[error("matrix is not hermitian: max deviation {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not unitary: max deviation {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { deviation: f64, tol: f64 },

    #[error("invalid dimension {got}; need at least {min}")]
    InvalidDimension { got: usize, min: usize },

    #[error("outcome index {index} out of range for dimension {dim}")]
    OutcomeOutOfRange { index: usize, dim: usize },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),

    #[error("invalid reduced blocks: {0}")]
    InvalidBlocks(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("shape error: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
