use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::language::{noun_phrase, NounPhrase, ParseTree};
use crate::rng::{purpose, stream_rng};
use crate::semantic_map::{NodeId, NodeKind, Pose2, SemanticGraph};
use crate::symbols::{GroundingSymbol, Relation, Vocabulary};

use super::features::PhraseInfo;
use super::graph::FactorGraph;
use super::DcgError;

/// Side of the square fixture worlds are drawn in, meters.
const EXTENT: f64 = 20.0;
/// Unrelated objects keep at least this far apart, so no relation holds by
/// accident.
const SPACING: f64 = 3.0;
const DIRICHLET: f64 = 0.1;

/// A small world in which an instruction has exactly one correct goal.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub world: SemanticGraph,
    pub target: NodeId,
}

struct Builder<'a, R> {
    world: SemanticGraph,
    vocab: &'a Vocabulary,
    rng: R,
}

impl<R: RngCore> Builder<'_, R> {
    fn free_spot(&mut self) -> Pose2 {
        for _ in 0..1000 {
            let p = Pose2::new(
                self.rng.random_range(0.0..EXTENT),
                self.rng.random_range(0.0..EXTENT),
                self.rng.random_range(-PI..PI),
            );
            if self.world.nodes().all(|n| n.pose.distance(p) >= SPACING) {
                return p;
            }
        }
        // Fall back to a far corner lane; only reachable in crowded worlds.
        Pose2::new(EXTENT + SPACING * self.world.len() as f64, 0.0, 0.0)
    }

    fn add(&mut self, type_name: &str, color: Option<&str>, pose: Pose2) -> NodeId {
        let kind = self
            .vocab
            .types()
            .iter()
            .find(|t| t.name == type_name)
            .map_or(NodeKind::Object, |t| t.kind);
        let id = self.world.add_landmark(kind, type_name, pose, false);
        self.world.node_mut(id).expect("just added").color = color.map(str::to_string);
        id
    }

    fn other_color(&mut self, not: &str) -> Option<String> {
        let options: Vec<&String> = self.vocab.colors().iter().filter(|c| c.as_str() != not).collect();
        if options.is_empty() {
            return None;
        }
        Some(options[self.rng.random_range(0..options.len())].clone())
    }

    /// Places an object satisfying `np`, with distractors that fail exactly
    /// one part of the description.
    fn place(&mut self, np: &NounPhrase<'_>) -> Result<NodeId, DcgError> {
        let target = match &np.relation {
            Some((relation, inner)) => {
                let inner = noun_phrase(inner, self.vocab).ok_or_else(|| DcgError::Unattached(inner.text.clone()))?;
                let landmark = self.place(&inner)?;
                let lp = self.world.node(landmark).expect("placed").pose;
                let pose = match relation {
                    Relation::Inside => {
                        let n = Normal::new(0.0, 0.05).expect("valid sigma");
                        Pose2::new(lp.x + n.sample(&mut self.rng), lp.y + n.sample(&mut self.rng), 0.0)
                    }
                    Relation::Near => {
                        let a = self.rng.random_range(-PI..PI);
                        Pose2::new(lp.x + a.cos(), lp.y + a.sin(), 0.0)
                    }
                    Relation::LeftOf => Pose2::new(lp.x, lp.y + 1.0, 0.0),
                    Relation::RightOf => Pose2::new(lp.x, lp.y - 1.0, 0.0),
                };
                let id = self.add(np.type_name, np.color, pose);
                if *relation == Relation::Inside {
                    self.world.node_mut(id).expect("just added").container = Some(landmark);
                }
                // Same description, unrelated landmark.
                let spot = self.free_spot();
                self.add(inner.type_name, inner.color, spot);
                let spot = self.free_spot();
                self.add(np.type_name, np.color, spot);
                id
            }
            None => {
                let spot = self.free_spot();
                self.add(np.type_name, np.color, spot)
            }
        };
        if let Some(c) = np.color {
            let other = self.other_color(c);
            let spot = self.free_spot();
            self.add(np.type_name, other.as_deref(), spot);
        }
        Ok(target)
    }
}

/// Builds variant `variant` of the fixture world for an instruction.
pub fn fixture_world(tree: &ParseTree, vocab: &Vocabulary, seed: u64, variant: u64) -> Result<Fixture, DcgError> {
    let np = tree
        .child("NP")
        .and_then(|np| noun_phrase(np, vocab))
        .ok_or_else(|| DcgError::Unattached(tree.text.clone()))?;
    let mut b = Builder {
        world: SemanticGraph::new(vocab.type_names().clone(), DIRICHLET),
        vocab,
        rng: stream_rng(seed, &[purpose::FIXTURE, hash_text(&tree.text), variant]),
    };
    let target = b.place(&np)?;
    let used: Vec<String> = b.world.landmarks().map(|n| n.name.clone()).collect();
    let spare: Vec<String> = vocab
        .object_types()
        .filter(|t| !used.iter().any(|u| u == t))
        .map(str::to_string)
        .collect();
    for _ in 0..2 {
        if spare.is_empty() {
            break;
        }
        let t = spare[b.rng.random_range(0..spare.len())].clone();
        let spot = b.free_spot();
        b.add(&t, None, spot);
    }
    Ok(Fixture { world: b.world, target })
}

fn hash_text(s: &str) -> u64 {
    // FNV-1a; only needs to be stable across runs.
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Reference grounding of a world-space factor graph: an NP grounds to every
/// object matching its type, color and relational modifier; a PP to its
/// relation paired with each grounding of its object; the root to its verb's
/// behavior paired with each grounding of the object phrase.
pub fn teacher_assignment(graph: &FactorGraph, infos: &[PhraseInfo], world: &SemanticGraph) -> Vec<Vec<bool>> {
    let mut values: Vec<Vec<bool>> = graph.nodes.iter().map(|n| vec![false; n.candidates.len()]).collect();
    for i in (0..graph.len()).rev() {
        let node = &graph.nodes[i];
        let phrase = &infos[node.phrase];
        let child_true: Vec<&GroundingSymbol> = node
            .children
            .iter()
            .flat_map(|&c| {
                graph.nodes[c]
                    .candidates
                    .iter()
                    .zip(&values[c])
                    .filter(|(_, &v)| v)
                    .map(|(s, _)| s)
            })
            .collect();
        let grounded = |id: NodeId| {
            child_true
                .iter()
                .any(|c| matches!(c, GroundingSymbol::Object { node, .. } | GroundingSymbol::Region { node, .. } if *node == id))
        };
        let out: Vec<bool> = node
            .candidates
            .iter()
            .map(|sym| match sym {
                GroundingSymbol::Object { node, type_name, color } => {
                    let type_ok = phrase.head_type.as_deref() == Some(type_name.as_str());
                    let color_ok = phrase.color.is_none() || phrase.color == *color;
                    let rel_ok = !phrase.has_pp
                        || child_true.iter().any(|c| match c {
                            GroundingSymbol::SpatialRelation { relation, landmark } => {
                                match (world.node(*node), world.node(*landmark)) {
                                    (Some(s), Some(l)) => relation.holds(s, l),
                                    _ => false,
                                }
                            }
                            _ => false,
                        });
                    type_ok && color_ok && rel_ok
                }
                GroundingSymbol::Region { type_name, .. } => phrase.head_type.as_deref() == Some(type_name.as_str()),
                GroundingSymbol::SpatialRelation { relation, landmark } => {
                    phrase.relation == Some(*relation) && grounded(*landmark)
                }
                GroundingSymbol::Behavior { behavior, goal } => phrase.behavior == Some(*behavior) && grounded(*goal),
                _ => false,
            })
            .collect();
        values[i] = out;
    }
    values
}
