//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
///
/// Contract violations with no sensible recovery (dimension mismatches in
/// hot-path math) panic instead; everything that depends on external input,
/// numerics, or files reports through this type.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A configuration value is outside its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The latent series lost its geometric decay and cannot be summed.
    #[error("series summand stopped decaying at term {term} (norm {norm:.3e}); \
             the latent matrix is too close to the unit circle for this state")]
    SummandDecayFailure { term: usize, norm: f64 },

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    /// A scenario produced a non-finite state, latent, or estimate.
    #[error("numerical failure during evaluation: {0}")]
    NumericalFailure(String),

    /// A dataset or checkpoint file is malformed.
    #[error("malformed artifact {path}: {reason}")]
    MalformedArtifact { path: String, reason: String },

    /// A required artifact is missing on disk.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
