use crate::language::{noun_phrase, prepositional, ParseTree};
use crate::semantic_map::SemanticGraph;
use crate::symbols::{AnnotationSymbol, BehaviorType, GroundingSymbol, Relation, Vocabulary};

use super::graph::FactorGraph;
use super::infer::{ChildView, FactorScorer};
use super::model::DcgModel;

/// Identifies the feature templates below; stored in model files so a model
/// is never scored with a different extractor.
pub const EXTRACTOR_ID: &str = "phrase-conj-v1";

/// Linguistic facts about one phrase that the features look at.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseInfo {
    pub label: String,
    /// Last noun of an NP, or the verb of the root.
    pub head_word: Option<String>,
    pub head_type: Option<String>,
    pub color: Option<String>,
    /// For an NP, the relation of its PP modifier; for a PP, its own.
    pub relation: Option<Relation>,
    pub has_pp: bool,
    pub behavior: Option<BehaviorType>,
}

/// Phrase facts indexed by preorder node id.
pub fn phrase_infos(tree: &ParseTree, vocab: &Vocabulary) -> Vec<PhraseInfo> {
    tree.preorder()
        .into_iter()
        .map(|t| {
            let mut info = PhraseInfo {
                label: t.label.clone(),
                ..PhraseInfo::default()
            };
            match t.label.as_str() {
                "NP" => {
                    info.head_word = t.children_labeled("NN").last().map(|c| c.text.clone());
                    info.has_pp = t.child("PP").is_some();
                    if let Some(np) = noun_phrase(t, vocab) {
                        info.head_type = Some(np.type_name.to_string());
                        info.color = np.color.map(str::to_string);
                        info.relation = np.relation.map(|r| r.0);
                    }
                }
                "PP" => info.relation = prepositional(t, vocab).map(|r| r.0),
                _ => {
                    if let Some(vb) = t.child("VB") {
                        info.head_word = Some(vb.text.clone());
                        info.behavior = vocab.behavior_for(&vb.text);
                    }
                }
            }
            info
        })
        .collect()
}

fn yn(b: bool) -> &'static str {
    if b {
        "y"
    } else {
        "n"
    }
}

/// Indicator features of one factor. `children` are the child symbols
/// currently marked true.
pub fn features(
    phrase: &PhraseInfo,
    sym: &GroundingSymbol,
    children: &[&GroundingSymbol],
    world: Option<&SemanticGraph>,
    vocab: &Vocabulary,
) -> Vec<String> {
    let word = phrase.head_word.as_deref().unwrap_or("-");
    let head = phrase.head_type.as_deref();
    let mut f = vec![format!("bias|{}|{}", phrase.label, sym.kind())];
    match sym {
        GroundingSymbol::Object { node, type_name, color } => {
            let type_match = match head {
                Some(h) => yn(h == type_name),
                None => "?",
            };
            let color_status = match (&phrase.color, color) {
                (None, _) => "any",
                (Some(a), Some(b)) if a == b => "y",
                _ => "n",
            };
            let rel = if !phrase.has_pp {
                "nopp"
            } else {
                let related: Vec<_> = children
                    .iter()
                    .filter_map(|c| match c {
                        GroundingSymbol::SpatialRelation { relation, landmark } => Some((*relation, *landmark)),
                        _ => None,
                    })
                    .collect();
                if related.is_empty() {
                    "none"
                } else {
                    let holds = world.is_some_and(|w| {
                        related.iter().any(|&(r, l)| match (w.node(*node), w.node(l)) {
                            (Some(s), Some(l)) => r.holds(s, l),
                            _ => false,
                        })
                    });
                    if holds {
                        "holds"
                    } else {
                        "fails"
                    }
                }
            };
            f.push(format!("obj|type={type_match}|color={color_status}|rel={rel}"));
            f.push(format!("lex|{word}|obj|{type_name}"));
        }
        GroundingSymbol::Region { type_name, .. } => {
            f.push(format!("reg|type={}", head.map_or("?", |h| yn(h == type_name))));
            f.push(format!("lex|{word}|reg|{type_name}"));
        }
        GroundingSymbol::SpatialRelation { relation, landmark } => {
            let prep = yn(phrase.relation == Some(*relation));
            let grounded = children
                .iter()
                .any(|c| matches!(c, GroundingSymbol::Object { node, .. } | GroundingSymbol::Region { node, .. } if node == landmark));
            f.push(format!("rel|prep={prep}|landmark={}", yn(grounded)));
        }
        GroundingSymbol::Behavior { behavior, goal } => {
            let verb = yn(phrase.behavior == Some(*behavior));
            let grounded = children
                .iter()
                .any(|c| matches!(c, GroundingSymbol::Object { node, .. } | GroundingSymbol::Region { node, .. } if node == goal));
            f.push(format!("beh|verb={verb}|goal={}", yn(grounded)));
            f.push(format!("lex|{word}|beh|{behavior}"));
        }
        GroundingSymbol::Detector { classifier } => {
            let m = match (head, vocab.classifier_type(classifier)) {
                (Some(h), Some(t)) => yn(h == t),
                _ => "?",
            };
            f.push(format!("det|type={m}"));
            f.push(format!("lex|{word}|det|{classifier}"));
        }
        GroundingSymbol::Annotation(AnnotationSymbol::Type(t)) => {
            f.push(format!("ann_type|{}", head.map_or("?", |h| yn(h == t))));
        }
        GroundingSymbol::Annotation(AnnotationSymbol::Relation {
            relation,
            subject,
            landmark,
        }) => {
            let subj = head.map_or("?", |h| yn(h == subject));
            if phrase.has_pp {
                let prep = yn(phrase.relation == Some(*relation));
                let grounded = children
                    .iter()
                    .any(|c| matches!(c, GroundingSymbol::Annotation(AnnotationSymbol::Type(t)) if t == landmark));
                f.push(format!("ann_rel|subj={subj}|prep={prep}|landmark={}", yn(grounded)));
            } else {
                f.push(format!("ann_rel|subj={subj}|nopp"));
            }
        }
    }
    f
}

/// Features of candidate `cand` of factor node `node` given its children.
pub fn node_features(
    graph: &FactorGraph,
    infos: &[PhraseInfo],
    vocab: &Vocabulary,
    world: Option<&SemanticGraph>,
    node: usize,
    cand: usize,
    children: &[ChildView<'_>],
) -> Vec<String> {
    let true_children: Vec<&GroundingSymbol> = children
        .iter()
        .flat_map(|c| {
            graph.nodes[c.node]
                .candidates
                .iter()
                .zip(c.values)
                .filter(|(_, &v)| v)
                .map(|(s, _)| s)
        })
        .collect();
    let phrase = &infos[graph.nodes[node].phrase];
    let sym = &graph.nodes[node].candidates[cand];
    features(phrase, sym, &true_children, world, vocab)
}

/// `p(phi | gamma, lambda, children, world)` for a single factor.
pub fn factor_prob(
    model: &DcgModel,
    phi: bool,
    sym: &GroundingSymbol,
    phrase: &PhraseInfo,
    children: &[&GroundingSymbol],
    world: Option<&SemanticGraph>,
    vocab: &Vocabulary,
) -> f64 {
    model.prob(phi, &features(phrase, sym, children, world, vocab))
}

/// Scores a factor graph with a trained model.
pub struct ModelScorer<'a> {
    pub model: &'a DcgModel,
    pub infos: &'a [PhraseInfo],
    pub vocab: &'a Vocabulary,
    pub world: Option<&'a SemanticGraph>,
}

impl FactorScorer for ModelScorer<'_> {
    fn logit(&self, graph: &FactorGraph, node: usize, cand: usize, children: &[ChildView<'_>]) -> f64 {
        self.model
            .logit(&node_features(graph, self.infos, self.vocab, self.world, node, cand, children))
    }
}
