use std::collections::BTreeMap;

use super::symbol::{AnnotationSymbol, BehaviorType, GroundingSymbol};
use super::vocabulary::Vocabulary;
use super::SymbolError;
use crate::language::ParseTree;
use crate::semantic_map::{NodeKind, SemanticGraph};

/// Candidate groundings per parse-tree node, keyed by preorder node id.
/// Every phrase of the relevant categories has an entry, possibly empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolSpace {
    pub candidates: BTreeMap<usize, Vec<GroundingSymbol>>,
}

impl SymbolSpace {
    pub fn get(&self, node: usize) -> &[GroundingSymbol] {
        self.candidates.get(&node).map_or(&[], Vec::as_slice)
    }

    /// Total number of correspondence variables.
    pub fn variable_count(&self) -> usize {
        self.candidates.values().map(Vec::len).sum()
    }

    fn insert(&mut self, node: usize, mut list: Vec<GroundingSymbol>) {
        list.sort();
        list.dedup();
        self.candidates.insert(node, list);
    }
}

/// Referent symbols of a world: objects and regions under their MAP type.
fn referents(world: &SemanticGraph) -> Vec<GroundingSymbol> {
    world
        .landmarks()
        .filter_map(|n| {
            let type_name = world.map_type(n.id)?.to_string();
            Some(match n.kind {
                NodeKind::Region => GroundingSymbol::Region { node: n.id, type_name },
                _ => GroundingSymbol::Object {
                    node: n.id,
                    type_name,
                    color: n.color.clone(),
                },
            })
        })
        .collect()
}

/// Object/region symbols on every NP, relation-landmark pairs on every PP
/// and behavior-goal pairs on the root.
pub fn generate_grounding_space(world: &SemanticGraph, tree: &ParseTree, vocab: &Vocabulary) -> SymbolSpace {
    let refs = referents(world);
    let goals: Vec<_> = world.landmarks().map(|n| n.id).collect();
    let mut space = SymbolSpace::default();
    for (id, node) in tree.preorder().into_iter().enumerate() {
        match node.label.as_str() {
            "NP" => space.insert(id, refs.clone()),
            "PP" => {
                let list = vocab
                    .relations()
                    .flat_map(|relation| {
                        goals
                            .iter()
                            .map(move |&landmark| GroundingSymbol::SpatialRelation { relation, landmark })
                    })
                    .collect();
                space.insert(id, list);
            }
            _ => {}
        }
        if id == 0 {
            let list = BehaviorType::ALL
                .into_iter()
                .flat_map(|behavior| goals.iter().map(move |&goal| GroundingSymbol::Behavior { behavior, goal }))
                .collect();
            space.insert(id, list);
        }
    }
    space
}

/// One detector symbol per registered classifier on every NP.
pub fn generate_detector_space(tree: &ParseTree, vocab: &Vocabulary) -> Result<SymbolSpace, SymbolError> {
    if vocab.classifiers().is_empty() {
        return Err(SymbolError::EmptyVocabulary);
    }
    let list: Vec<GroundingSymbol> = vocab
        .classifiers()
        .iter()
        .map(|(id, _)| GroundingSymbol::Detector { classifier: id.clone() })
        .collect();
    let mut space = SymbolSpace::default();
    for (id, node) in tree.preorder().into_iter().enumerate() {
        if node.label == "NP" {
            space.insert(id, list.clone());
        }
    }
    Ok(space)
}

/// Every type assertion and every relation assertion between distinct
/// object types.
pub fn annotation_symbols(vocab: &Vocabulary) -> Vec<AnnotationSymbol> {
    let types: Vec<&str> = vocab.object_types().collect();
    let mut out: Vec<AnnotationSymbol> = types.iter().map(|t| AnnotationSymbol::Type(t.to_string())).collect();
    for relation in vocab.relations() {
        for a in &types {
            for b in &types {
                if a != b {
                    out.push(AnnotationSymbol::Relation {
                        relation,
                        subject: a.to_string(),
                        landmark: b.to_string(),
                    });
                }
            }
        }
    }
    out.sort();
    out
}

/// Annotation symbols on every NP.
pub fn generate_annotation_space(tree: &ParseTree, vocab: &Vocabulary) -> Result<SymbolSpace, SymbolError> {
    let symbols = annotation_symbols(vocab);
    if symbols.is_empty() {
        return Err(SymbolError::EmptyVocabulary);
    }
    let list: Vec<GroundingSymbol> = symbols.into_iter().map(GroundingSymbol::Annotation).collect();
    let mut space = SymbolSpace::default();
    for (id, node) in tree.preorder().into_iter().enumerate() {
        if node.label == "NP" {
            space.insert(id, list.clone());
        }
    }
    Ok(space)
}
