use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grade frame: {0}")]
    InvalidFrame(String),

    #[error("invalid belief distribution: {0}")]
    InvalidBelief(String),

    #[error("invalid mass function: {0}")]
    InvalidMass(String),

    #[error("invalid weights: {0}")]
    InvalidWeight(String),

    #[error("invalid attribute tree at {path}: {message}")]
    InvalidTree { path: String, message: String },

    #[error("total conflict at node {path:?}, combination step {step}: assessments are fully contradictory")]
    TotalConflict { path: String, step: usize },

    #[error("proportional finalization of a fully vacuous mass function")]
    VacuousFinalization,

    #[error("hyperparameter {name}={value} outside working box [{low}, {high}]")]
    OutOfBox {
        name: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("need at least 2 units to fit hyperparameters, found {0}")]
    InsufficientUnits(usize),

    #[error("invalid observation data: {0}")]
    InvalidObservation(String),

    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("non-finite objective: {0}")]
    NonFinite(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Parse(String),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TotalConflict { .. } => 3,
            Error::InsufficientUnits(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn tree(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidTree {
            path: path.into(),
            message: message.into(),
        }
    }
}
