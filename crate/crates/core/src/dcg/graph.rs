use crate::language::ParseTree;
use crate::symbols::{GroundingSymbol, SymbolSpace};

use super::DcgError;

/// Correspondence variables of one phrase.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorNode {
    /// Preorder id of the phrase in the parse tree.
    pub phrase: usize,
    pub candidates: Vec<GroundingSymbol>,
    /// Indices (into [`FactorGraph::nodes`]) of the nearest descendant
    /// phrases that have candidates.
    pub children: Vec<usize>,
}

/// The parse tree restricted to phrases with candidates. Nodes are stored in
/// preorder, so every child index is greater than its parent's.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    pub nodes: Vec<FactorNode>,
    pub roots: Vec<usize>,
}

impl FactorGraph {
    /// Builds a graph directly from candidate counts and child lists, for
    /// callers that score candidates without grounding symbols.
    pub fn from_shape(sizes: &[usize], children: &[Vec<usize>]) -> Result<Self, DcgError> {
        let mut has_parent = vec![false; sizes.len()];
        for (i, cs) in children.iter().enumerate() {
            for &c in cs {
                if c <= i || c >= sizes.len() {
                    return Err(DcgError::Malformed(format!("child {c} of node {i} is not a later node")));
                }
                has_parent[c] = true;
            }
        }
        let nodes = sizes
            .iter()
            .enumerate()
            .map(|(i, &k)| FactorNode {
                phrase: i,
                candidates: (0..k)
                    .map(|j| GroundingSymbol::Detector {
                        classifier: format!("c{j}"),
                    })
                    .collect(),
                children: children.get(i).cloned().unwrap_or_default(),
            })
            .collect();
        let roots = (0..sizes.len()).filter(|&i| !has_parent[i]).collect();
        Ok(Self { nodes, roots })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn variable_count(&self) -> usize {
        self.nodes.iter().map(|n| n.candidates.len()).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).sum()
    }

    pub fn node_for_phrase(&self, phrase: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.phrase == phrase)
    }
}

/// One factor node per phrase with a non-empty candidate list; links
/// mirror the tree with candidate-free phrases skipped.
pub fn build_graph(tree: &ParseTree, space: &SymbolSpace) -> Result<FactorGraph, DcgError> {
    fn walk(t: &ParseTree, next_id: &mut usize, space: &SymbolSpace, nodes: &mut Vec<FactorNode>) -> Vec<usize> {
        let id = *next_id;
        *next_id += 1;
        let cands = space.get(id);
        let own = if cands.is_empty() {
            None
        } else {
            nodes.push(FactorNode {
                phrase: id,
                candidates: cands.to_vec(),
                children: Vec::new(),
            });
            Some(nodes.len() - 1)
        };
        let mut below = Vec::new();
        for c in &t.children {
            below.extend(walk(c, next_id, space, nodes));
        }
        match own {
            Some(i) => {
                nodes[i].children = below;
                vec![i]
            }
            None => below,
        }
    }
    let mut nodes = Vec::new();
    let roots = walk(tree, &mut 0, space, &mut nodes);
    if nodes.is_empty() {
        return Err(DcgError::EmptySpace);
    }
    Ok(FactorGraph { nodes, roots })
}
