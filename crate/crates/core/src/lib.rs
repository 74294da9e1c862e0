//! Language-guided exploration with adaptive perception: instruction
//! parsing, factored grounding models, a particle filter over semantic
//! maps, a greedy behavior policy and a simulation harness.

pub mod assets;
pub mod bench;
pub mod dcg;
pub mod language;
pub mod perception;
pub mod policy;
pub mod semantic_map;
pub mod simworld;
pub mod symbols;

pub(crate) mod rng;

use std::path::PathBuf;

/// Directory holding the shipped vocabulary, grammar, corpus, registries and
/// scenarios.
pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}
