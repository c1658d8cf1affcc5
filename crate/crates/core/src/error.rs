use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid parameters or inputs.
    Domain,
    /// Filesystem or parse failure on external data.
    Io,
    /// The numerics could not produce a meaningful answer.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("tone at {f_hz} Hz aliases at sample rate {fs_hz} Hz (needs f < fs/2)")]
    Aliasing { f_hz: f64, fs_hz: f64 },

    #[error("parameters are unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("Fisher information is singular (condition number {condition:e})")]
    SingularFim { condition: f64 },

    #[error("non-finite Fisher information contribution at sample {k}")]
    NonFinite { k: usize },

    #[error("every averaging cell produced a singular Fisher information matrix")]
    AllCellsSingular,

    #[error("trace kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("trace contains no samples")]
    EmptyTrace,

    #[error("search band [{lo_hz}, {hi_hz}] Hz is empty or outside (0, fs/2)")]
    EmptyBand { lo_hz: f64, hi_hz: f64 },

    #[error("timestamps jitter by {max_jitter_s:e} s, more than 10% of the {period_s:e} s sample period")]
    Jitter { max_jitter_s: f64, period_s: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_)
            | Error::Aliasing { .. }
            | Error::KindMismatch { .. }
            | Error::EmptyBand { .. } => ErrorClass::Domain,
            Error::EmptyTrace | Error::Jitter { .. } | Error::Parse { .. } | Error::Io(_) => {
                ErrorClass::Io
            }
            Error::Unidentifiable(_)
            | Error::SingularFim { .. }
            | Error::NonFinite { .. }
            | Error::AllCellsSingular => ErrorClass::Numeric,
        }
    }
}
