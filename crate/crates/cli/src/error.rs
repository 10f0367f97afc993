use std::fmt;

use roadrl::eval::EvalError;
use roadrl::{EnvError, MetricsError, OodError, PolicyError, ScenarioError, TrainError};

/// Failure class of a command; each maps to a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Checkpoint,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Checkpoint => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(m: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: m.into() }
    }

    pub fn data(m: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: m.into() }
    }

    pub fn checkpoint(m: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Checkpoint, message: m.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            ErrorKind::Config => "config error",
            ErrorKind::Data => "data error",
            ErrorKind::Checkpoint => "checkpoint error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        Self::checkpoint(e.to_string())
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<OodError> for CliError {
    fn from(e: OodError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Env(e) => e.into(),
            EvalError::Metrics(e) => e.into(),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => Self::config(m),
            TrainError::Policy(p) => p.into(),
            other => Self::data(other.to_string()),
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}
