//! Ground-truth environment and scenario scripts.

mod env;
mod grid;
mod scenario;

pub use env::{ground_truth_query, EnvironmentSpec, VisibleObject, WorldObject};
pub use grid::{Cell, OccupancyGrid};
pub use scenario::{load_scenario, Scenario, ScenarioScript, ScriptEvent, Trigger};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("scenario format: {0}")]
    Format(String),
    #[error("scenario invariant violated: {0}")]
    InvariantViolation(String),
    #[error("{0}")]
    Io(String),
}
