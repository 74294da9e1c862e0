use std::collections::{BTreeMap, BTreeSet};

use crate::language::ParseTree;
use crate::semantic_map::{NodeId, SemanticGraph};
use crate::symbols::{
    generate_annotation_space, generate_detector_space, generate_grounding_space, AnnotationSymbol, BehaviorType,
    GroundingSymbol, Vocabulary,
};

use super::features::{node_features, phrase_infos, ModelScorer};
use super::graph::build_graph;
use super::infer::{infer, infer_with_marginals, Beam, ChildView};
use super::model::DcgModel;
use super::DcgError;

/// Classifiers whose detector variables are true in the argmax assignment.
pub fn infer_detectors(
    model: &DcgModel,
    tree: &ParseTree,
    vocab: &Vocabulary,
    beam: Beam,
) -> Result<BTreeSet<String>, DcgError> {
    let space = generate_detector_space(tree, vocab)?;
    let graph = build_graph(tree, &space)?;
    let infos = phrase_infos(tree, vocab);
    let scorer = ModelScorer {
        model,
        infos: &infos,
        vocab,
        world: None,
    };
    let a = infer(&graph, &scorer, beam);
    let mut out = BTreeSet::new();
    for (node, values) in graph.nodes.iter().zip(&a.values) {
        for (sym, &v) in node.candidates.iter().zip(values) {
            if let (GroundingSymbol::Detector { classifier }, true) = (sym, v) {
                out.insert(classifier.clone());
            }
        }
    }
    Ok(out)
}

/// Every annotation symbol with its marginal probability of being asserted
/// by some noun phrase, highest first.
pub fn infer_annotations(
    model: &DcgModel,
    tree: &ParseTree,
    vocab: &Vocabulary,
    beam: Beam,
) -> Result<Vec<(AnnotationSymbol, f64)>, DcgError> {
    let space = generate_annotation_space(tree, vocab)?;
    let graph = build_graph(tree, &space)?;
    let infos = phrase_infos(tree, vocab);
    let scorer = ModelScorer {
        model,
        infos: &infos,
        vocab,
        world: None,
    };
    let (_, marginals) = infer_with_marginals(&graph, &scorer, beam);
    let mut best: BTreeMap<&AnnotationSymbol, f64> = BTreeMap::new();
    for (node, m) in graph.nodes.iter().zip(&marginals) {
        for (sym, &p) in node.candidates.iter().zip(m) {
            if let GroundingSymbol::Annotation(a) = sym {
                let e = best.entry(a).or_insert(0.0);
                *e = e.max(p);
            }
        }
    }
    let mut out: Vec<(AnnotationSymbol, f64)> = best.into_iter().map(|(a, p)| (a.clone(), p)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorGrounding {
    pub behavior: BehaviorType,
    pub goal: NodeId,
    /// `p(phi = true)` of the chosen behavior factor given the inferred
    /// groundings of its object phrase.
    pub likelihood: f64,
    /// Correspondence variables in the graph (inference effort).
    pub variables: usize,
}

/// Most likely behavior for an instruction in one hypothesized world.
pub fn infer_behavior(
    model: &DcgModel,
    tree: &ParseTree,
    world: &SemanticGraph,
    vocab: &Vocabulary,
    beam: Beam,
) -> Result<BehaviorGrounding, DcgError> {
    let space = generate_grounding_space(world, tree, vocab);
    let graph = build_graph(tree, &space)?;
    let infos = phrase_infos(tree, vocab);
    let scorer = ModelScorer {
        model,
        infos: &infos,
        vocab,
        world: Some(world),
    };
    let a = infer(&graph, &scorer, beam);
    let root = graph.node_for_phrase(0).ok_or(DcgError::NoBehavior)?;
    let children: Vec<ChildView<'_>> = graph.nodes[root]
        .children
        .iter()
        .map(|&c| ChildView {
            node: c,
            values: &a.values[c],
        })
        .collect();
    let mut best: Option<(f64, BehaviorType, NodeId)> = None;
    for (j, sym) in graph.nodes[root].candidates.iter().enumerate() {
        let GroundingSymbol::Behavior { behavior, goal } = sym else {
            continue;
        };
        if !a.values[root][j] {
            continue;
        }
        let p = model.prob(true, &node_features(&graph, &infos, vocab, Some(world), root, j, &children));
        if best.is_none_or(|(q, _, _)| p > q) {
            best = Some((p, *behavior, *goal));
        }
    }
    let (likelihood, behavior, goal) = best.ok_or(DcgError::NoBehavior)?;
    Ok(BehaviorGrounding {
        behavior,
        goal,
        likelihood,
        variables: graph.variable_count(),
    })
}
