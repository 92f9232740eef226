use std::path::PathBuf;

/// Errors produced by samplers, targets and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A state or input vector contains a non-finite value.
    #[error("invalid state at component {component}{}: {detail}", step_suffix(*.step))]
    InvalidState {
        component: usize,
        step: Option<u64>,
        detail: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate direction vector (zero norm)")]
    DegenerateDirection,

    #[error("posterior ensemble has no members")]
    EmptyEnsemble,

    #[error("insufficient data: need at least {needed} examples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn step_suffix(step: Option<u64>) -> String {
    match step {
        Some(s) => format!(" (step {s})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(component: usize, detail: impl Into<String>) -> Self {
        Error::InvalidState {
            component,
            step: None,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches the chain step index to an invalid-state error.
    pub fn at_step(self, step: u64) -> Self {
        match self {
            Error::InvalidState {
                component, detail, ..
            } => Error::InvalidState {
                component,
                step: Some(step),
                detail,
            },
            other => other,
        }
    }

    /// True for errors caused by the dynamics blowing up rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::InvalidState { .. } | Error::Numerical(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Returns the index of the first non-finite entry, if any.
pub(crate) fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match first_non_finite(values) {
        Some(i) => Err(Error::invalid(i, format!("{what} is {}", values[i]))),
        None => Ok(()),
    }
}
