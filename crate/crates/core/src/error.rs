use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input violated a documented precondition.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("parse error in {source_name} line {line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("missing key `{key}` in {source_name}")]
    MissingKey { key: String, source_name: String },

    /// Laboratory record whose energy bookkeeping does not close.
    #[error("inconsistent test record: {0}")]
    InconsistentRecord(String),

    /// A transition whose successor velocity is not positive.
    #[error("infeasible transition: successor velocity {v_next:.4} m/s")]
    InfeasibleTransition { v_next: f64 },

    /// No admissible control reaches the finish from the requested start.
    #[error("infeasible problem: no admissible control from stage {stage}")]
    InfeasibleProblem { stage: usize },

    #[error("forward pass left the feasible set at stage {stage} (v={v:.3} m/s, w={w:.1} J)")]
    PolicyLookup { stage: usize, v: f64, w: f64 },

    #[error("summaries refer to different courses ({a} vs {b})")]
    CourseMismatch { a: String, b: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("gpx: {0}")]
    Gpx(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than an unsolvable problem.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::InfeasibleProblem { .. }
                | Error::InfeasibleTransition { .. }
                | Error::PolicyLookup { .. }
        )
    }
}
