//! Symbol spaces the grounding heads choose from.

mod relations;
mod space;
mod symbol;
mod vocabulary;

pub use relations::{Relation, INSIDE_RADIUS, NEAR_RADIUS, SIDE_OFFSET, SIDE_RANGE};
pub use space::{
    annotation_symbols, generate_annotation_space, generate_detector_space, generate_grounding_space, SymbolSpace,
};
pub use symbol::{AnnotationSymbol, BehaviorType, GroundingSymbol};
pub use vocabulary::{TypeEntry, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymbolError {
    #[error("vocabulary line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("vocabulary declares no symbols for this head")]
    EmptyVocabulary,
    #[error("{0}")]
    Io(String),
}
