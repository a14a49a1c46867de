use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GnatError>;

#[derive(Debug, Error)]
pub enum GnatError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("masked state does not cover index {index} required by the stencil")]
    IncompleteMask { index: usize },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("snapshot procedure {procedure} cannot record tier {tier} iterations")]
    HookMismatch { procedure: u8, tier: u8 },

    #[error("invalid snapshot file {path:?}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot matrix is identically zero")]
    ZeroMatrix,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} is rank deficient (numerical rank {rank} < {required})")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        required: usize,
    },

    #[error("{solver} failed at time step {step} after {iterations} iterations (residual {residual:.3e})")]
    StepFailure {
        solver: &'static str,
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("singular {what} at time step {step}, iteration {iteration}")]
    Singular {
        what: &'static str,
        step: usize,
        iteration: usize,
        /// Iterate at which the system became singular.
        dump: Vec<f64>,
    },

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("incomplete bound trace: requested step {requested}, available {available}")]
    IncompleteTrace { requested: usize, available: usize },

    #[error("all probe pairs coincide; Lipschitz ratio undefined")]
    CoincidentProbes,

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl GnatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GnatError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        GnatError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(GnatError::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
