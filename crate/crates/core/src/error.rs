use std::path::PathBuf;

use crate::dynamics::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {}", format_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("no unique stationary state: drift matrix is singular (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("drift matrix is not stable: some eigenvalue has non-positive real part")]
    Unstable,

    #[error("channel 1 requires |α₁| > 0")]
    ZeroDetectionAmplitude,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("integration produced a non-finite state at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("record mismatch: {0}")]
    RecordMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
