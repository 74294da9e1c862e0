//! Paired adaptive/exhaustive trials, metrics, reports and an interactive
//! session.

mod compare;
mod repl;
mod svg;
mod trial;

pub use compare::{
    compare, emit, report_text, targets, trend_verdicts, write_metrics_csv, ComparisonReport, ModeMeans, Targets,
    Verdict, CALIBRATION_BAND,
};
pub use repl::repl;
pub use svg::trajectory_svg;
pub use trial::{run_trial, Pipeline, TrialMetrics, TrialOutcome};

use crate::dcg::DcgError;
use crate::language::LanguageError;
use crate::perception::PerceptionError;
use crate::policy::PolicyError;
use crate::simworld::SimError;
use crate::symbols::SymbolError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Dcg(#[from] DcgError),
    #[error(transparent)]
    Symbols(#[from] SymbolError),
    #[error(transparent)]
    Language(#[from] LanguageError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
