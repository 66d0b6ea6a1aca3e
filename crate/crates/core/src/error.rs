//! Error type shared across the tensor core, model, metrics and pipeline.

use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, MagnetError>;

/// Errors emitted by tensor operations, model construction, datasets and training.
#[derive(Debug)]
pub enum MagnetError {
    /// Operand shapes are incompatible with the requested operation.
    Shape(String),
    /// Invalid hyperparameter or configuration value.
    Config(String),
    /// An API contract was violated (e.g. backward on a non-scalar loss).
    Contract(String),
    /// A dataset file is missing, malformed or inconsistent.
    Data(String),
    /// A checkpoint file is corrupt or does not match the model.
    Checkpoint(String),
    /// Training produced a non-finite loss or gradient.
    Divergence(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for MagnetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MagnetError::Shape(msg) => write!(f, "shape error: {msg}"),
            MagnetError::Config(msg) => write!(f, "config error: {msg}"),
            MagnetError::Contract(msg) => write!(f, "contract error: {msg}"),
            MagnetError::Data(msg) => write!(f, "data error: {msg}"),
            MagnetError::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            MagnetError::Divergence(msg) => write!(f, "divergence: {msg}"),
            MagnetError::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for MagnetError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            MagnetError::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for MagnetError {
    fn from(err: std::io::Error) -> Self {
        MagnetError::Io(err)
    }
}
