//! Factored grounding model over binary correspondence variables: one
//! logistic factor per (phrase, candidate symbol), conditioned on the true
//! symbols of the phrase's children.

mod features;
mod graph;
mod heads;
mod infer;
mod model;
mod teacher;
mod train;

pub use features::{factor_prob, features, node_features, phrase_infos, ModelScorer, PhraseInfo, EXTRACTOR_ID};
pub use graph::{build_graph, FactorGraph, FactorNode};
pub use heads::{infer_annotations, infer_behavior, infer_detectors, BehaviorGrounding};
pub use infer::{
    assignment_score, brute_force_infer, infer, infer_with_marginals, is_locally_optimal, log_probs, sigmoid, Beam,
    ChildView, CorrespondenceAssignment, FactorScorer, BRUTE_FORCE_CAP,
};
pub use model::{DcgModel, Head, TrainingMeta};
pub use teacher::{fixture_world, teacher_assignment, Fixture};
pub use train::{build_training_set, train, Optimizer, TrainConfig, TrainReport, TrainingSet};

use crate::symbols::SymbolError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DcgError {
    #[error("no phrase has candidate symbols")]
    EmptySpace,
    #[error("{0} correspondence variables exceed the enumeration cap")]
    TooLarge(usize),
    #[error("corpus has no annotations for the {0} head")]
    NoAnnotations(Head),
    #[error("annotation not attached to any phrase: {0}")]
    Unattached(String),
    #[error("no behavior grounded")]
    NoBehavior,
    #[error("model line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Symbols(#[from] SymbolError),
    #[error("{0}")]
    Io(String),
}
