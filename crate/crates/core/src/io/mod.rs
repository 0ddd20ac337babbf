//! Files, commands and the live feed: dataset generation, calibration runs,
//! full-pipeline replay with metrics, and the NDJSON socket server.

pub mod calibration;
pub mod container;
pub mod dataset;
pub mod metrics;
pub mod replay;
pub mod serve;
pub mod sidecar;

use thiserror::Error;

pub use calibration::{calibrate_dataset, collect_calibration_samples, train_regressor, RegressorTraining};
pub use container::{ContainerHeader, ContainerReader, ContainerWriter};
pub use dataset::{generate, Dataset, DatasetManifest, EyeGeometry, GenerateConfig, PlanSegment, TruthMapping};
pub use metrics::MetricsReport;
pub use replay::{replay, FramePipeline, GazeModel, ReplayOptions, ReplayOutput};
pub use sidecar::{FeatureRecord, TruthRecord};

/// Errors surfaced by the commands, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("degenerate calibration: {0}")]
    Degenerate(String),
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("cannot bind: {0}")]
    Bind(String),
}

impl IoError {
    pub fn exit_code(&self) -> u8 {
        match self {
            IoError::Config(_) => 2,
            IoError::Io(_) | IoError::Format(_) => 3,
            IoError::Degenerate(_) => 4,
            IoError::Mismatch(_) => 5,
            IoError::Bind(_) => 6,
        }
    }
}

impl From<container::ContainerError> for IoError {
    fn from(e: container::ContainerError) -> Self {
        match e {
            container::ContainerError::Io(e) => IoError::Io(e),
            other => IoError::Format(other.to_string()),
        }
    }
}

impl From<sidecar::SidecarError> for IoError {
    fn from(e: sidecar::SidecarError) -> Self {
        match e {
            sidecar::SidecarError::Io(e) => IoError::Io(e),
            other => IoError::Format(other.to_string()),
        }
    }
}

/// Reads and parses a JSON file; unreadable files are I/O errors, bad JSON
/// is a config error.
pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<std::path::Path>) -> Result<T, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: impl AsRef<std::path::Path>, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
