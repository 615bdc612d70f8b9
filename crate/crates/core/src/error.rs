use thiserror::Error;

use crate::graph::GraphError;
use crate::models::ModelError;
use crate::panel::PanelError;

/// Problems with a configuration file or with parameters passed in code.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{equation} equation gives probability {value} outside [0, 1] at ({state})")]
    Probability {
        equation: &'static str,
        state: String,
        value: f64,
    },
}

/// Numerical failures while forming weights or weighted estimates.
#[derive(Debug, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("zero denominator in {factor} for id {id} at k={k}")]
    ZeroDenominator { id: u64, k: u32, factor: &'static str },
    #[error("{0}")]
    Domain(String),
    #[error("bootstrap: only {successes} of {replicates} replicates succeeded (need {required})")]
    TooFewReplicates {
        successes: usize,
        replicates: usize,
        required: usize,
    },
}

/// Failures of the exact enumeration oracle.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("horizon {k} exceeds the enumeration guard of {max}")]
    HorizonGuard { k: u32, max: u32 },
    #[error("positivity violation in the data-generating law at {state}")]
    Positivity { state: String },
}

/// Crate-level error grouping every module error by kind.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl From<ModelError> for Error {
    fn from(e: ModelError) -> Self {
        Error::Estimation(EstimationError::Model(e))
    }
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    /// 2 configuration, 3 data/validation, 4 numerical/positivity.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Panel(PanelError::IntervalOutOfRange { .. }) => ErrorKind::Config,
            Error::Panel(_) => ErrorKind::Data,
            Error::Graph(GraphError::Parse { .. }) => ErrorKind::Data,
            Error::Graph(_) => ErrorKind::Config,
            Error::Estimation(EstimationError::Domain(_)) => ErrorKind::Config,
            Error::Estimation(EstimationError::Model(ModelError::Config(_))) => ErrorKind::Config,
            Error::Estimation(_) => ErrorKind::Numerical,
            Error::Oracle(OracleError::HorizonGuard { .. }) => ErrorKind::Config,
            Error::Oracle(_) => ErrorKind::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
