use std::fmt;

use thiserror::Error;

use crate::audit::AuditReport;
use crate::sampler::{InsertionPlan, StarvationDiagnosis};
use crate::sparsify::RemovalPlan;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage an error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Split,
    Sparsify,
    Sample,
    Position,
    Audit,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Sparsify => "sparsify",
            Stage::Sample => "sample",
            Stage::Position => "position",
            Stage::Audit => "audit",
            Stage::Write => "write",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("edge stream contains no edges")]
    EmptyStream,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("split ratios sum to {0}, expected 1")]
    RatioSum(f64),

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot normalize an all-zero vector")]
    ZeroMass,

    #[error("instance too large for exhaustive enumeration: {0}")]
    InstanceTooLarge(String),

    #[error("timeline does not match graph: {0}")]
    TimelineMismatch(String),

    #[error("{0} is not supported on bipartite graphs")]
    UnsupportedOnBipartite(&'static str),

    #[error("budget {budget} exceeds the {visible} visible edges")]
    BudgetExceedsVisible {
        budget: usize,
        visible: usize,
        partial: Box<RemovalPlan>,
    },

    #[error("need at least 2 timestamps, got {0}")]
    TooFewTimestamps(usize),

    #[error("cannot fit a density to an empty sample")]
    EmptySample,

    #[error("insertion budget unmet: {placed}/{budget} edges placed; {diagnosis}")]
    SamplingInfeasible {
        placed: usize,
        budget: usize,
        diagnosis: StarvationDiagnosis,
        partial: Box<InsertionPlan>,
    },

    #[error("plan does not match graph: {0}")]
    PlanMismatch(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("audit failed: {}", .0.failed_checks().join(", "))]
    AuditFailed(Box<AuditReport>),

    #[error("nothing to benchmark: {0}")]
    NothingToBenchmark(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, skipping stage attribution.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
