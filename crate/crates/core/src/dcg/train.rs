use indexmap::IndexSet;

use crate::language::{Corpus, CorpusEntry};
use crate::semantic_map::SemanticGraph;
use crate::symbols::{
    generate_annotation_space, generate_detector_space, generate_grounding_space, AnnotationSymbol, GroundingSymbol,
    Vocabulary,
};

use super::features::{node_features, phrase_infos, PhraseInfo, EXTRACTOR_ID};
use super::graph::{build_graph, FactorGraph};
use super::infer::{sigmoid, ChildView};
use super::model::{DcgModel, Head, TrainingMeta};
use super::teacher::{fixture_world, teacher_assignment};
use super::DcgError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Plain full-batch gradient ascent.
    Gradient,
    /// Full-batch ascent with per-weight AdaGrad step sizes.
    AdaGrad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    /// Fixture worlds generated per instruction for the behavior head.
    pub fixtures_per_entry: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.1,
            l2: 1e-3,
            seed: 0,
            fixtures_per_entry: 2,
            optimizer: Optimizer::AdaGrad,
        }
    }
}

/// Teacher-forced factor examples: the features of every correspondence
/// variable given the annotated values of its children, and its label.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub features: IndexSet<String>,
    pub examples: Vec<(Vec<u32>, bool)>,
    /// Annotated assignments the examples came from; the objective is the
    /// mean log-likelihood per assignment.
    pub instances: usize,
}

impl TrainingSet {
    pub fn push(&mut self, names: Vec<String>, label: bool) {
        let ids = names.into_iter().map(|n| self.features.insert_full(n).0 as u32).collect();
        self.examples.push((ids, label));
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    fn dot(w: &[f64], ids: &[u32]) -> f64 {
        ids.iter().map(|&i| w[i as usize]).sum()
    }

    /// Mean assignment log-likelihood minus `l2 / 2 * |w|^2`.
    pub fn objective(&self, w: &[f64], l2: f64) -> f64 {
        let n = self.instances.max(1) as f64;
        let ll: f64 = self
            .examples
            .iter()
            .map(|(ids, y)| {
                let (lt, lf) = super::infer::log_probs(Self::dot(w, ids));
                if *y {
                    lt
                } else {
                    lf
                }
            })
            .sum();
        ll / n - 0.5 * l2 * w.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64], l2: f64) -> Vec<f64> {
        let n = self.instances.max(1) as f64;
        let mut g: Vec<f64> = w.iter().map(|x| -l2 * x).collect();
        for (ids, y) in &self.examples {
            let r = (if *y { 1.0 } else { 0.0 } - sigmoid(Self::dot(w, ids))) / n;
            for &i in ids {
                g[i as usize] += r;
            }
        }
        g
    }

    /// Fraction of variables whose most likely value is the label.
    pub fn accuracy(&self, w: &[f64]) -> f64 {
        let hits = self
            .examples
            .iter()
            .filter(|(ids, y)| (Self::dot(w, ids) > 0.0) == *y)
            .count();
        hits as f64 / self.examples.len().max(1) as f64
    }

    /// Maximizes the objective. Returns the weights and final objective.
    pub fn fit(&self, config: &TrainConfig) -> (Vec<f64>, f64) {
        let mut w = vec![0.0; self.features.len()];
        let mut g2 = vec![0.0; w.len()];
        for _ in 0..config.epochs {
            let g = self.gradient(&w, config.l2);
            for i in 0..w.len() {
                w[i] += match config.optimizer {
                    Optimizer::Gradient => config.learning_rate * g[i],
                    Optimizer::AdaGrad => {
                        g2[i] += g[i] * g[i];
                        config.learning_rate * g[i] / (g2[i].sqrt() + 1e-12)
                    }
                };
            }
        }
        let obj = self.objective(&w, config.l2);
        (w, obj)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub examples: usize,
    pub objective: f64,
    pub train_accuracy: f64,
}

fn push_graph(
    set: &mut TrainingSet,
    graph: &FactorGraph,
    infos: &[PhraseInfo],
    vocab: &Vocabulary,
    world: Option<&SemanticGraph>,
    gold: &[Vec<bool>],
) {
    set.instances += 1;
    for i in 0..graph.len() {
        let children: Vec<ChildView<'_>> = graph.nodes[i]
            .children
            .iter()
            .map(|&c| ChildView { node: c, values: &gold[c] })
            .collect();
        for (j, &y) in gold[i].iter().enumerate() {
            set.push(node_features(graph, infos, vocab, world, i, j, &children), y);
        }
    }
}

/// Gold values for a language-only head: a symbol is true at the NP that
/// introduces it. Fails if the entry lists something no NP introduces.
fn attach_gold(
    graph: &FactorGraph,
    infos: &[PhraseInfo],
    vocab: &Vocabulary,
    entry: &CorpusEntry,
    head: Head,
) -> Result<Vec<Vec<bool>>, DcgError> {
    let mut seen = 0usize;
    let mut values = Vec::with_capacity(graph.len());
    for node in &graph.nodes {
        let p = &infos[node.phrase];
        let h = p.head_type.as_deref();
        let row: Vec<bool> = node
            .candidates
            .iter()
            .map(|sym| match sym {
                GroundingSymbol::Detector { classifier } => {
                    entry.detectors.contains(classifier) && vocab.classifier_type(classifier).is_some() && vocab.classifier_type(classifier) == h
                }
                GroundingSymbol::Annotation(a) => {
                    entry.annotations.contains(a)
                        && match a {
                            AnnotationSymbol::Type(t) => h == Some(t.as_str()),
                            AnnotationSymbol::Relation {
                                relation,
                                subject,
                                landmark,
                            } => {
                                h == Some(subject.as_str())
                                    && p.relation == Some(*relation)
                                    && graph_child_head(graph, infos, node) == Some(landmark.as_str())
                            }
                        }
                }
                _ => false,
            })
            .collect();
        values.push(row);
    }
    // Every listed symbol must be attached somewhere.
    let attached = |sym: &GroundingSymbol| {
        graph
            .nodes
            .iter()
            .zip(&values)
            .any(|(n, row)| n.candidates.iter().zip(row).any(|(s, &v)| v && s == sym))
    };
    match head {
        Head::Perception => {
            for d in &entry.detectors {
                seen += 1;
                if !attached(&GroundingSymbol::Detector { classifier: d.clone() }) {
                    return Err(DcgError::Unattached(format!("{d} in {:?}", entry.instruction.raw_text)));
                }
            }
        }
        _ => {
            for a in &entry.annotations {
                seen += 1;
                if !attached(&GroundingSymbol::Annotation(a.clone())) {
                    return Err(DcgError::Unattached(format!("{a} in {:?}", entry.instruction.raw_text)));
                }
            }
        }
    }
    if seen == 0 {
        return Err(DcgError::NoAnnotations(head));
    }
    Ok(values)
}

fn graph_child_head<'a>(graph: &FactorGraph, infos: &'a [PhraseInfo], node: &super::graph::FactorNode) -> Option<&'a str> {
    node.children
        .iter()
        .map(|&c| &infos[graph.nodes[c].phrase])
        .find(|p| p.label == "NP")
        .and_then(|p| p.head_type.as_deref())
}

/// Teacher-forced examples for one head over a whole corpus.
pub fn build_training_set(corpus: &Corpus, head: Head, vocab: &Vocabulary, config: &TrainConfig) -> Result<TrainingSet, DcgError> {
    let mut set = TrainingSet::default();
    let mut annotated = 0usize;
    for entry in &corpus.entries {
        let tree = &entry.instruction.tree;
        let infos = phrase_infos(tree, vocab);
        match head {
            Head::Perception | Head::Annotation => {
                let space = if head == Head::Perception {
                    generate_detector_space(tree, vocab)?
                } else {
                    generate_annotation_space(tree, vocab)?
                };
                let graph = build_graph(tree, &space)?;
                let gold = match attach_gold(&graph, &infos, vocab, entry, head) {
                    Err(DcgError::NoAnnotations(_)) => continue,
                    r => r?,
                };
                annotated += 1;
                push_graph(&mut set, &graph, &infos, vocab, None, &gold);
            }
            Head::Behavior => {
                for v in 0..config.fixtures_per_entry {
                    let fx = fixture_world(tree, vocab, config.seed, v)?;
                    let space = generate_grounding_space(&fx.world, tree, vocab);
                    let graph = build_graph(tree, &space)?;
                    let gold = teacher_assignment(&graph, &infos, &fx.world);
                    let expected = GroundingSymbol::Behavior {
                        behavior: entry.behavior.behavior,
                        goal: fx.target,
                    };
                    let root_true: Vec<&GroundingSymbol> = graph.nodes[0]
                        .candidates
                        .iter()
                        .zip(&gold[0])
                        .filter(|(_, &v)| v)
                        .map(|(s, _)| s)
                        .collect();
                    if root_true != [&expected] {
                        return Err(DcgError::Unattached(format!(
                            "behavior {} {} in {:?}",
                            entry.behavior.behavior, entry.behavior.goal_type, entry.instruction.raw_text
                        )));
                    }
                    push_graph(&mut set, &graph, &infos, vocab, Some(&fx.world), &gold);
                }
                annotated += 1;
            }
        }
    }
    if annotated == 0 {
        return Err(DcgError::NoAnnotations(head));
    }
    Ok(set)
}

/// Trains one head. Deterministic in (corpus, config).
pub fn train(corpus: &Corpus, head: Head, vocab: &Vocabulary, config: &TrainConfig) -> Result<(DcgModel, TrainReport), DcgError> {
    let set = build_training_set(corpus, head, vocab, config)?;
    let (w, objective) = set.fit(config);
    let report = TrainReport {
        examples: set.len(),
        objective,
        train_accuracy: set.accuracy(&w),
    };
    let model = DcgModel {
        head,
        extractor: EXTRACTOR_ID.to_string(),
        weights: set.features.iter().cloned().zip(w).collect(),
        meta: TrainingMeta {
            epochs: config.epochs,
            learning_rate: config.learning_rate,
            l2: config.l2,
            seed: config.seed,
            objective,
        },
    };
    Ok((model, report))
}
