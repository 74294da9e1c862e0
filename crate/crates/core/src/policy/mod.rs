//! Greedy behavior selection, grid path planning and the perception-action
//! executive that ties the pipeline together.

mod executive;
mod models;
mod plan;
mod select;

pub use executive::{Accounting, CycleRecord, Executive, RunConfig, TaskRecord};
pub use models::Models;
pub use plan::{plan_path, Trajectory};
pub use select::{behavior_score, psi, psi_with, select_behavior, Behavior, PSI_SCALE};

use crate::dcg::DcgError;
use crate::language::LanguageError;
use crate::perception::PerceptionError;
use crate::semantic_map::MapError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("no particle grounded a behavior")]
    NoBehaviors,
    #[error("goal is unreachable")]
    Unreachable,
    #[error("cycle cap of {0} reached before the script finished")]
    CycleCapExceeded(u64),
    #[error("run config: {0}")]
    Config(String),
    #[error(transparent)]
    Language(#[from] LanguageError),
    #[error(transparent)]
    Dcg(#[from] DcgError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}
