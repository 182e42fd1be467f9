//! Crate-level error and its exit-code classes.

use thiserror::Error;

use crate::cdm::{FitError, IngestError, NoiseModelError};
use crate::policy::{CheckpointError, TrainError};
use crate::simenv::EnvError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    NoiseModel(#[from] NoiseModelError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Failure classes with distinct process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Numeric => "numeric",
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Env(EnvError::InvalidConfig(_)) | Error::Train(TrainError::InvalidConfig(_)) => ErrorClass::Config,
            Error::NoiseModel(NoiseModelError::Parse(_) | NoiseModelError::Invalid(_)) => ErrorClass::Config,
            Error::Fit(_) | Error::Train(_) | Error::Env(_) => ErrorClass::Numeric,
            Error::Io(_) | Error::Ingest(_) | Error::NoiseModel(_) | Error::Checkpoint(_) => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes() {
        assert_eq!(Error::Config("x".into()).class().exit_code(), 2);
        assert_eq!(Error::from(IngestError::EmptyDataset).class(), ErrorClass::Data);
        assert_eq!(Error::from(TrainError::DivergedTraining { batch: 1 }).class(), ErrorClass::Numeric);
        assert_eq!(Error::from(TrainError::InvalidConfig("x".into())).class(), ErrorClass::Config);
        assert_eq!(Error::from(FitError::InsufficientData { k: 3, found: 2 }).class(), ErrorClass::Numeric);
    }
}
