//! Semantic graph world model and the particle filter over graphs.

mod coverage;
mod eif;
mod export;
mod filter;
mod graph;
mod pose;

pub use coverage::{in_cone, CoverageGrid};
pub use eif::{eif_solve, SolveMode};
pub use export::{snapshot, MapSnapshot};
pub use filter::{
    apply_annotations, marginal_map, predict, reweight, update_observations, AnnotationContext,
    Association, Detection, CHI2_3_99, FilterConfig, MarginalMap, Particle, ParticleSet, SensorContext, UpdateReport,
};
pub use graph::{
    Edge, EdgeKind, MarginalPrior, MetricLayer, Node, NodeId, NodeKind, PriorKind, SemanticGraph, UnaryPrior,
};
pub use pose::{between_residual, wrap_angle, Pose2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("information matrix is singular (is the graph anchored?)")]
    Singular,
    #[error("all particle weights underflowed")]
    DegenerateWeights,
    #[error("graph invariant violated: {0}")]
    InvariantViolation(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}
