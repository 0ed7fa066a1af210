//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Crate-wide error enumeration.
///
/// Variants map one-to-one onto the failure classes of the public
/// operations: invalid numerical state, configuration problems, domain
/// violations of an individual operation, solver blowup, missing curve
/// samples, unsupported requests, and I/O with path context.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A state or density contains NaN or infinite samples.
    #[error("invalid state: {what} contains non-finite samples")]
    NonFinite { what: &'static str },

    /// Construction or run parameters are inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument violates a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Energy fell below the divergence guard, indicating numerical blowup.
    #[error("solver failure: energy {energy:.6e} fell below the divergence floor {floor:.6e}")]
    SolverDiverged { energy: f64, floor: f64 },

    /// A curve lookup requested a mass that was never sampled.
    #[error("missing sample: no curve point at m = {m} (interpolation is not performed)")]
    MissingSample { m: f64 },

    /// The operation is documented as unsupported for this input class.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Degenerate input for which no finite answer exists.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Curve computation failed at a specific mass point.
    #[error("solver failure at m = {m}: {source}")]
    CurvePoint {
        m: f64,
        #[source]
        source: Box<Error>,
    },

    /// Filesystem failure, annotated with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
