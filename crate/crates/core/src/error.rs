use thiserror::Error;

use crate::energy::Field;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Chambers overlap or touch, the interior is disconnected, or a channel
    /// cannot be attached to a chamber face.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A rectangle cannot be represented on the requested grid.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Cutoff ramps of two chambers would share support.
    #[error("cutoff overlap: {0}")]
    CutoffOverlap(String),

    /// An iterative estimator hit its iteration cap. `last` is the final
    /// value of the estimated quantity.
    #[error("estimation of {what} did not converge after {iterations} iterations (last value {last:e})")]
    Estimation {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("retraction failed: {reason}")]
    Retraction {
        reason: String,
        last: Option<Box<Field>>,
    },

    #[error("degenerate generators: {0}")]
    DegenerateGenerators(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn retraction(reason: impl Into<String>, last: Option<Field>) -> Self {
        Error::Retraction {
            reason: reason.into(),
            last: last.map(Box::new),
        }
    }
}
