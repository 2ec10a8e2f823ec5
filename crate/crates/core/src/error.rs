use thiserror::Error;

/// Errors produced by the solvers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("quadrature did not reach tolerance {requested:e} (achieved estimate {achieved:e})")]
    Accuracy { requested: f64, achieved: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed at t = {at}: {reason}")]
    IntegrationFailure { at: f64, reason: String },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("multiplicity: {0}")]
    Multiplicity(String),

    #[error("internal inconsistency at stage {stage}: obstruction {obstruction:e}")]
    InternalInconsistency { stage: String, obstruction: f64 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps the error with a stage label for reporting from the harness.
    pub fn at_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error under any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
