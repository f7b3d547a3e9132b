use cpt_core::cost::CostError;
use cpt_core::templates::TemplateError;
use cpt_core::ConfigError;
use thiserror::Error;

pub const FAILURES: u8 = 1;
pub const USAGE: u8 = 2;
pub const CONFIG: u8 = 3;
pub const DATASET: u8 = 4;
pub const BACKEND: u8 = 5;
pub const IO: u8 = 6;
pub const UNKNOWN_MODEL: u8 = 7;

/// Errors that end a command before it can report results.
#[derive(Debug, Error)]
pub enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Dataset(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Cost(CostError),
}

impl From<CostError> for Failure {
    fn from(e: CostError) -> Self {
        Failure::Cost(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Template(_) => CONFIG,
            Failure::Usage(_) => USAGE,
            Failure::Dataset(_) => DATASET,
            Failure::Backend(_) => BACKEND,
            Failure::Io(_) => IO,
            Failure::Cost(CostError::UnknownModel { .. }) => UNKNOWN_MODEL,
            Failure::Cost(_) => CONFIG,
        }
    }
}
