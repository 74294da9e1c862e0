//! Simulated perception: classifier registry and cost model, adaptive
//! configuration, sensing and observation replay.

mod registry;
mod sense;

pub use registry::{configure, ClassifierSpec, Mode, PerceptionConfig, Registry};
pub use sense::{replay, sense, Frame, ObservationLog, ReplayFrame, SenseResult, SensorModel};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PerceptionError {
    #[error("registry line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unknown classifier {0}")]
    UnknownClassifier(String),
    #[error("{0}")]
    Io(String),
}
