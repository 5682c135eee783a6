//! Error type shared by every module in the crate.

use std::fmt;

/// Failure modes surfaced by the library.
///
/// Configuration problems carry a stable machine-readable `code` so the CLI
/// can reject bad inputs with a precise reason and exit status 2.
#[derive(Debug)]
pub enum Error {
    /// A slice or matrix had the wrong length/shape for the operation.
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A parameter value is outside the operation's domain.
    Domain(String),
    /// Dense-matrix construction was requested beyond the configured size cap.
    ResourceLimit {
        n: usize,
        limit: usize,
    },
    /// The chirp-periodic prefix is shorter than the channel's maximum delay.
    PrefixTooShort {
        l_cpp: usize,
        l_max: usize,
    },
    /// Not enough samples/frames to run the requested analysis.
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    /// A diagonal shift that no (delay, Doppler) pair within bounds produces.
    NoPath {
        shift: i64,
    },
    /// Linear system unsolvable even after ridge regularization.
    Singular,
    /// Rejected experiment configuration; `code` is stable for scripting.
    Config {
        code: &'static str,
        message: String,
    },
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl Error {
    /// Helper for `Domain` errors built from format strings.
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Helper for configuration rejections.
    pub fn config(code: &'static str, message: impl Into<String>) -> Self {
        Error::Config {
            code,
            message: message.into(),
        }
    }

    /// Stable reason code for configuration rejections, `None` otherwise.
    pub fn config_code(&self) -> Option<&'static str> {
        match self {
            Error::Config { code, .. } => Some(code),
            _ => None,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected length {expected}, got {got}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::ResourceLimit { n, limit } => {
                write!(f, "dense size {n} exceeds the configured limit {limit}")
            }
            Error::PrefixTooShort { l_cpp, l_max } => write!(
                f,
                "chirp-periodic prefix length {l_cpp} is shorter than the maximum path delay {l_max}"
            ),
            Error::InsufficientData { what, needed, got } => {
                write!(f, "{what}: need at least {needed}, got {got}")
            }
            Error::NoPath { shift } => write!(
                f,
                "diagonal shift {shift} maps to no (delay, Doppler) pair within bounds"
            ),
            Error::Singular => write!(f, "linear system is singular even after regularization"),
            Error::Config { code, message } => write!(f, "invalid config [{code}]: {message}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
