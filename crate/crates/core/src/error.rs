use std::path::PathBuf;

/// Failure modes shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient accuracy: {0}")]
    Accuracy(String),

    #[error("capacity exceeded: {what} needs {required}, limit is {limit}")]
    Capacity {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    #[error("value out of tabulated range: {0}")]
    Range(String),

    #[error("envelope below floor at a k/2pi = ({0:.4}, {1:.4})")]
    DegenerateEnvelope(f64, f64),

    #[error("imaginary residue {residue:.3e} exceeds tolerance {tolerance:.3e}")]
    HermiticityViolation { residue: f64, tolerance: f64 },

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("grid does not cover the density support: weight deficit {0:.3e}")]
    Coverage(f64),

    #[error("{} region pixel(s) fall below the envelope floor: {:?}", .0.len(), .0)]
    ExcludedPixels(Vec<(usize, usize)>),

    #[error("malformed input {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
