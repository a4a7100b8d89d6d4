//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors produced by the solvers, diagnostics and the harness.
#[derive(Debug, Error)]
pub enum PemError {
    #[error("dimension mismatch: expected {expected} samples, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("non-Hermitian spectrum: imaginary residue {residue:.3e} after synthesis")]
    NonHermitian { residue: f64 },

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PemError>;

impl PemError {
    /// Process exit code used by the CLI: 2 config, 3 blow-up/instability, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PemError::Config { .. } | PemError::InvalidParameter(_) => 2,
            PemError::BlowUp { .. } | PemError::Constraint(_) => 3,
            PemError::Io(_) | PemError::Snapshot(_) => 4,
            _ => 2,
        }
    }
}
