use std::path::PathBuf;

use crate::mss::MssHistory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index {index} out of range [0, {bound})")]
    IndexRange { index: usize, bound: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("lattice mismatch between operands")]
    LatticeMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "power method did not converge in {iterations} iterations (last residual {residual:e})"
    )]
    PowerMethodNonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate residual denominator: shifted energy plus shift is zero")]
    DegenerateDenominator,

    #[error("successive substitution did not converge in {} outer iterations", .history.outer_iterations())]
    MssNonConvergence { history: Box<MssHistory> },

    #[error("internal consistency violated: {0}")]
    Internal(String),

    /// `line` is 0 for values given as command-line flags.
    #[error("config error {}, key `{key}`: {message}", config_origin(*.line))]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn config_origin(line: usize) -> String {
    if line == 0 {
        "in command-line flags".into()
    } else {
        format!("at line {line}")
    }
}
