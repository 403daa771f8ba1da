use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while loading, validating or running a scenario.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{context}: dangling reference to unknown {kind} \"{id}\"")]
    DanglingReference {
        context: String,
        kind: &'static str,
        id: String,
    },

    #[error("duplicate {kind} id \"{id}\"")]
    DuplicateId { kind: &'static str, id: String },

    #[error("{subject}: {field} must be {requirement}, got {value}")]
    InvalidAttribute {
        subject: String,
        field: &'static str,
        requirement: &'static str,
        value: String,
    },

    #[error("unknown mode \"{0}\"")]
    UnknownMode(String),

    #[error("unknown activity kind \"{0}\"")]
    UnknownActivityKind(String),

    #[error("person \"{person}\": plan {plan} violates activity/leg alternation: {message}")]
    PlanAlternation {
        person: String,
        plan: usize,
        message: String,
    },

    #[error("cordon inside set must be a nonempty proper subset of the network nodes")]
    InvalidCordonRegion,

    #[error("toll periods must cover 24h without overlap: {0}")]
    TollPeriodCoverage(String),

    #[error("unknown toll preset \"{0}\"")]
    UnknownTollPreset(String),

    #[error("person \"{person}\", leg {leg}: leg is not routed")]
    UnroutedLeg { person: String, leg: usize },

    #[error("person \"{person}\", leg {leg}: route discontinuity at position {position}")]
    RouteDiscontinuity {
        person: String,
        leg: usize,
        position: usize,
    },

    #[error("no route from link \"{from}\" to link \"{to}\" at {dep_time}s")]
    Unreachable {
        from: String,
        to: String,
        dep_time: u32,
    },

    #[error("person \"{person}\": events do not match plan: {message}")]
    EventPlanMismatch { person: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("run directory {path} is incomplete: missing {missing}")]
    IncompleteRunDir { path: PathBuf, missing: String },

    #[error("runs are not comparable: {0} (pass force=true to override)")]
    CompareMismatch(String),

    #[error("iteration {iteration} failed in stage {stage}: {source}")]
    Iteration {
        iteration: usize,
        stage: &'static str,
        #[source]
        source: Box<SimError>,
    },
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, err: &serde_json::Error) -> Self {
        SimError::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
