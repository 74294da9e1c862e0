use std::collections::BTreeSet;

use langmap::assets;
use langmap::dcg::*;
use langmap::language::{Corpus, ParseTree};
use langmap::semantic_map::{NodeKind, Pose2, SemanticGraph};
use langmap::symbols::{
    generate_detector_space, generate_grounding_space, AnnotationSymbol, BehaviorType, GroundingSymbol, Relation,
    Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Log-linear factors with a bias per variable and a weight for every
/// (variable, true child variable) pair.
struct PairScorer {
    bias: Vec<Vec<f64>>,
    pair: Vec<Vec<Vec<Vec<f64>>>>,
}

impl PairScorer {
    fn random(graph: &FactorGraph, rng: &mut impl Rng) -> Self {
        let n = graph.len();
        let bias = graph
            .nodes
            .iter()
            .map(|f| (0..f.candidates.len()).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let pair = graph
            .nodes
            .iter()
            .map(|f| {
                (0..f.candidates.len())
                    .map(|_| {
                        (0..n)
                            .map(|c| (0..graph.nodes[c].candidates.len()).map(|_| rng.random_range(-3.0..3.0)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { bias, pair }
    }
}

impl FactorScorer for PairScorer {
    fn logit(&self, _: &FactorGraph, node: usize, cand: usize, children: &[ChildView<'_>]) -> f64 {
        let mut z = self.bias[node][cand];
        for c in children {
            for (k, &v) in c.values.iter().enumerate() {
                if v {
                    z += self.pair[node][cand][c.node][k];
                }
            }
        }
        z
    }
}

fn random_graph(rng: &mut impl Rng) -> FactorGraph {
    let n = rng.random_range(1..=4);
    let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4)).collect();
    let mut children = vec![Vec::new(); n];
    for c in 1..n {
        // Parent always precedes the child; some nodes stay roots.
        if rng.random_bool(0.85) {
            children[rng.random_range(0..c)].push(c);
        }
    }
    FactorGraph::from_shape(&sizes, &children).unwrap()
}

#[test]
fn unbounded_beam_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let g = random_graph(&mut rng);
        let s = PairScorer::random(&g, &mut rng);
        let dp = infer(&g, &s, Beam::Unbounded);
        let bf = brute_force_infer(&g, &s).unwrap();
        assert_eq!(dp.values, bf.values);
        assert!((dp.score - bf.score).abs() < 1e-9);
        assert!(is_locally_optimal(&g, &s, &dp));
    }
}

#[test]
fn marginals_are_exact_without_beam() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let g = random_graph(&mut rng);
        if g.variable_count() > 12 {
            continue;
        }
        let s = PairScorer::random(&g, &mut rng);
        let (_, marg) = infer_with_marginals(&g, &s, Beam::Unbounded);
        // Oracle: sum exp(score) over all assignments.
        let v = g.variable_count();
        let sizes: Vec<usize> = g.nodes.iter().map(|n| n.candidates.len()).collect();
        let mut want: Vec<Vec<f64>> = sizes.iter().map(|&k| vec![0.0; k]).collect();
        let mut z = 0.0;
        for mask in 0..1u64 << v {
            let mut bit = 0;
            let values: Vec<Vec<bool>> = sizes
                .iter()
                .map(|&k| {
                    (0..k)
                        .map(|_| {
                            bit += 1;
                            mask >> (bit - 1) & 1 == 1
                        })
                        .collect()
                })
                .collect();
            let p = assignment_score(&g, &s, &values).exp();
            z += p;
            for (i, row) in values.iter().enumerate() {
                for (j, &b) in row.iter().enumerate() {
                    if b {
                        want[i][j] += p;
                    }
                }
            }
        }
        // Locally normalized factors: the joint already sums to one.
        assert!((z - 1.0).abs() < 1e-9, "z = {z}");
        for (a, b) in marg.iter().flatten().zip(want.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn narrow_beam_never_beats_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let g = random_graph(&mut rng);
        let s = PairScorer::random(&g, &mut rng);
        let exact = infer(&g, &s, Beam::Unbounded);
        let narrow = infer(&g, &s, Beam::Width(2));
        assert!(narrow.score <= exact.score + 1e-9);
        assert!((assignment_score(&g, &s, &narrow.values) - narrow.score).abs() < 1e-9);
    }
}

fn vocab() -> Vocabulary {
    assets::vocabulary().unwrap()
}

fn tree(s: &str) -> ParseTree {
    let v = vocab();
    assets::grammar(&v).unwrap().parse(s).unwrap().tree
}

fn two_object_world(v: &Vocabulary) -> SemanticGraph {
    let mut w = SemanticGraph::new(v.type_names().clone(), 0.1);
    w.add_landmark(NodeKind::Object, "ball", Pose2::new(2.0, 0.0, 0.0), false);
    w.add_landmark(NodeKind::Object, "box", Pose2::new(2.1, 0.0, 0.0), false);
    w
}

#[test]
fn graph_shapes() {
    let v = vocab();
    let t = tree("retrieve the ball inside the box");
    let g = build_graph(&t, &generate_grounding_space(&two_object_world(&v), &t, &v)).unwrap();
    let labels: Vec<&str> = g.nodes.iter().map(|n| t.preorder()[n.phrase].label.as_str()).collect();
    assert_eq!(labels, ["VP", "NP", "PP", "NP"]);
    assert_eq!(g.edge_count(), 3);
    assert_eq!(g.roots, [0]);

    // Detector space: only the NPs, outer one linked to the inner one.
    let g = build_graph(&t, &generate_detector_space(&t, &v).unwrap()).unwrap();
    assert_eq!(g.len(), 2);
    assert_eq!(g.nodes[0].children, [1]);

    let empty = SemanticGraph::new(v.type_names().clone(), 0.1);
    let space = generate_grounding_space(&empty, &t, &v);
    assert_eq!(build_graph(&t, &space), Err(DcgError::EmptySpace));
}

#[test]
fn factor_prob_is_logistic() {
    let v = vocab();
    let t = tree("go to the crackers box");
    let infos = phrase_infos(&t, &v);
    let sym = GroundingSymbol::Detector {
        classifier: "crackers_box_detector".into(),
    };
    let mut m = DcgModel::empty(Head::Perception);
    assert_eq!(factor_prob(&m, true, &sym, &infos[3], &[], None, &v), 0.5);
    let f = features(&infos[3], &sym, &[], None, &v);
    assert!(f.contains(&"det|type=y".to_string()));
    m.weights.insert("det|type=y".into(), 10.0);
    let p = factor_prob(&m, true, &sym, &infos[3], &[], None, &v);
    assert!((p - 1.0 / (1.0 + (-10f64).exp())).abs() < 1e-15);
    assert!((p + factor_prob(&m, false, &sym, &infos[3], &[], None, &v) - 1.0).abs() < 1e-15);
    m.weights["det|type=y"] = -10.0;
    assert!((factor_prob(&m, false, &sym, &infos[3], &[], None, &v) - p).abs() < 1e-15);
}

#[test]
fn gradient_matches_finite_differences() {
    let v = vocab();
    let corpus = assets::corpus(&v).unwrap();
    let small = Corpus {
        entries: corpus.entries[..12].to_vec(),
        provenance: corpus.provenance.clone(),
    };
    let cfg = TrainConfig::default();
    let set = build_training_set(&small, Head::Behavior, &v, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-5;
    for _ in 0..10 {
        let w: Vec<f64> = (0..set.features.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = set.gradient(&w, cfg.l2);
        for i in 0..w.len() {
            let mut wp = w.clone();
            wp[i] += h;
            let mut wm = w.clone();
            wm[i] -= h;
            let fd = (set.objective(&wp, cfg.l2) - set.objective(&wm, cfg.l2)) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6);
            assert!(rel <= 1e-4, "feature {i}: analytic {} vs numeric {fd}", g[i]);
        }
    }
}

#[test]
fn separable_corpus_is_learned() {
    let v = vocab();
    let g = assets::grammar(&v).unwrap();
    let entries = ["retrieve the ball", "go to the box"]
        .iter()
        .map(|s| langmap::language::annotate(&g.parse(s).unwrap().tree, &v).unwrap())
        .collect();
    let corpus = Corpus {
        entries,
        provenance: "toy".into(),
    };
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    for head in Head::ALL {
        let (_, report) = train(&corpus, head, &v, &cfg).unwrap();
        assert_eq!(report.train_accuracy, 1.0, "{head}");
    }
    let zero = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let (m, _) = train(&corpus, Head::Perception, &v, &zero).unwrap();
    assert!(m.weights.values().all(|&w| w == 0.0));
    assert_eq!(m.prob(true, &["det|type=y"]), 0.5);

    let none = Corpus {
        entries: Vec::new(),
        provenance: String::new(),
    };
    assert_eq!(
        train(&none, Head::Annotation, &v, &cfg).unwrap_err(),
        DcgError::NoAnnotations(Head::Annotation)
    );
}

struct Trained {
    vocab: Vocabulary,
    perception: DcgModel,
    annotation: DcgModel,
    behavior: DcgModel,
}

fn trained() -> Trained {
    let v = vocab();
    let corpus = assets::corpus(&v).unwrap();
    let cfg = TrainConfig::default();
    let perception = train(&corpus, Head::Perception, &v, &cfg).unwrap().0;
    let annotation = train(&corpus, Head::Annotation, &v, &cfg).unwrap().0;
    let behavior = train(&corpus, Head::Behavior, &v, &cfg).unwrap().0;
    Trained {
        vocab: v,
        perception,
        annotation,
        behavior,
    }
}

#[test]
fn heads_ground_the_example_commands() {
    let m = trained();
    let v = &m.vocab;

    let t = tree("retrieve the ball inside the box");
    let dets = infer_detectors(&m.perception, &t, v, Beam::default()).unwrap();
    let want: BTreeSet<String> = ["ball_detector", "box_detector"].iter().map(|s| s.to_string()).collect();
    assert_eq!(dets, want);

    let t = tree("get the drill from the box");
    let anns = infer_annotations(&m.annotation, &t, v, Beam::default()).unwrap();
    let asserted: BTreeSet<AnnotationSymbol> = anns.iter().filter(|a| a.1 >= 0.5).map(|a| a.0.clone()).collect();
    let want: BTreeSet<AnnotationSymbol> = ["type(drill)", "type(box)", "inside(drill,box)"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(asserted, want);

    let t = tree("go to the crackers box");
    let mut w = SemanticGraph::new(v.type_names().clone(), 0.1);
    w.add_landmark(NodeKind::Object, "box", Pose2::new(1.0, 0.0, 0.0), false);
    let target = w.add_landmark(NodeKind::Object, "crackers_box", Pose2::new(4.0, 2.0, 0.0), false);
    w.add_landmark(NodeKind::Object, "ball", Pose2::new(1.0, 5.0, 0.0), false);
    let b = infer_behavior(&m.behavior, &t, &w, v, Beam::default()).unwrap();
    assert_eq!((b.behavior, b.goal), (BehaviorType::Navigate, target));
    assert!(b.likelihood > 0.5);

    // The relation decides between two balls.
    let t = tree("retrieve the ball inside the box");
    let mut w = SemanticGraph::new(v.type_names().clone(), 0.1);
    let bx = w.add_landmark(NodeKind::Object, "box", Pose2::new(5.0, 0.0, 0.0), false);
    w.add_landmark(NodeKind::Object, "ball", Pose2::new(1.0, 0.0, 0.0), false);
    let inside = w.add_landmark(NodeKind::Object, "ball", Pose2::new(5.1, 0.0, 0.0), true);
    assert!(Relation::Inside.holds(w.node(inside).unwrap(), w.node(bx).unwrap()));
    let b = infer_behavior(&m.behavior, &t, &w, v, Beam::default()).unwrap();
    assert_eq!((b.behavior, b.goal), (BehaviorType::Retrieve, inside));

    // Detector sets stay compact.
    let corpus = assets::corpus(v).unwrap();
    for e in corpus.entries.iter().take(30) {
        let t = &e.instruction.tree;
        let nouns: BTreeSet<&str> = t.preorder().iter().filter(|n| n.label == "NN").map(|n| n.text.as_str()).collect();
        let d = infer_detectors(&m.perception, t, v, Beam::default()).unwrap();
        assert!(d.len() <= nouns.len() + 1);
    }
}

#[test]
fn training_is_deterministic_and_models_roundtrip() {
    let v = vocab();
    let corpus = assets::corpus(&v).unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let (a, _) = train(&corpus, Head::Behavior, &v, &cfg).unwrap();
    let (b, _) = train(&corpus, Head::Behavior, &v, &cfg).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("behavior.model");
    a.save(&p).unwrap();
    assert_eq!(DcgModel::load(&p).unwrap(), a);
}

#[test]
fn shipped_corpus_matches_generator() {
    let v = vocab();
    let g = assets::grammar(&v).unwrap();
    let shipped = assets::corpus(&v).unwrap();
    assert_eq!(shipped, assets::generated_corpus(&v, &g).unwrap());
    assert_eq!(shipped.len(), assets::CORPUS_SIZE);
}

#[test]
fn fixture_worlds_have_one_goal() {
    let v = vocab();
    let corpus = assets::corpus(&v).unwrap();
    for e in &corpus.entries {
        let t = &e.instruction.tree;
        let fx = fixture_world(t, &v, 0, 0).unwrap();
        let g = build_graph(t, &generate_grounding_space(&fx.world, t, &v)).unwrap();
        let gold = teacher_assignment(&g, &phrase_infos(t, &v), &fx.world);
        let goals: Vec<_> = g.nodes[0]
            .candidates
            .iter()
            .zip(&gold[0])
            .filter(|(_, &b)| b)
            .map(|(s, _)| s.clone())
            .collect();
        assert_eq!(
            goals,
            [GroundingSymbol::Behavior {
                behavior: e.behavior.behavior,
                goal: fx.target
            }],
            "{}",
            e.instruction.raw_text
        );
    }
}
