use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. The variant name doubles as the error
/// class printed by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain `{name}`: {reason}")]
    InvalidDomain { name: String, reason: String },

    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("invalid point: parameter `{param}` {reason}")]
    InvalidPoint { param: String, reason: String },

    #[error("invalid experiment `{id}`: {reason}")]
    InvalidExperiment { id: String, reason: String },

    #[error("feasibility expression: {0}")]
    Expression(String),

    #[error("no training data")]
    NoTrainingData,

    #[error("degenerate surrogate: {0}")]
    DegenerateSurrogate(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("experiment `{record}` does not share the current search space structure")]
    StructuralMismatch { record: String },

    #[error("space is not a per-dimension subset of the reference space")]
    NotASubset,

    #[error("too few jobs: need at least {needed}, got {got}")]
    TooFewJobs { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("experiment specification: {0}")]
    SpecFile(String),

    #[error("knowledge base file {path}: {reason}")]
    KbFormat { path: PathBuf, reason: String },

    #[error("knowledge base directory {0} does not exist")]
    MissingKb(PathBuf),

    #[error("application: {0}")]
    Application(String),

    #[error("family calibration failed: target {target}, achieved {achieved}")]
    Calibration { target: f64, achieved: f64 },

    #[error("oracle violation: {0}")]
    OracleViolation(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable class name used in CLI diagnostics.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidDomain { .. } => "InvalidDomain",
            Error::InvalidSpace(_) => "InvalidSpace",
            Error::InvalidPoint { .. } => "InvalidPoint",
            Error::InvalidExperiment { .. } => "InvalidExperiment",
            Error::Expression(_) => "Expression",
            Error::NoTrainingData => "NoTrainingData",
            Error::DegenerateSurrogate(_) => "DegenerateSurrogate",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::StructuralMismatch { .. } => "StructuralMismatch",
            Error::NotASubset => "NotASubset",
            Error::TooFewJobs { .. } => "TooFewJobs",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::SpecFile(_) => "SpecFile",
            Error::KbFormat { .. } => "KbFormat",
            Error::MissingKb(_) => "MissingKb",
            Error::Application(_) => "Application",
            Error::Calibration { .. } => "Calibration",
            Error::OracleViolation(_) => "OracleViolation",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
