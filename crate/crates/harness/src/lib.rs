//! Experiment driver for the FTN laboratory: configuration files, weight
//! persistence, detector training, Monte-Carlo BER campaigns and CSV output.

pub mod campaign;
pub mod config;
pub mod report;
pub mod scenario;
pub mod streams;
pub mod training;
pub mod weights;

use std::path::{Path, PathBuf};

pub use campaign::{run_campaign, BerPoint, BerReport, Campaign, StopRule};
pub use config::{ConfigError, RunConfig};
pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] ftn_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("weight file: {0}")]
    WeightFormat(String),
    #[error("scenario {0} needs detector weights")]
    MissingWeights(Scenario),
    #[error("duplicate report rows: {0}")]
    DuplicateRows(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(ftn_core::Error::InvalidConfig { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
