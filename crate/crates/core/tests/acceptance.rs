//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any criterion fails.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::Instant;

use langmap::assets;
use langmap::bench::{compare, Pipeline};
use langmap::dcg::*;
use langmap::perception::Mode;
use langmap::policy::{plan_path, psi, select_behavior, Behavior, Executive, PSI_SCALE};
use langmap::semantic_map::{eif_solve, wrap_angle, Edge, EdgeKind, NodeId, Pose2, SemanticGraph, SolveMode};
use langmap::simworld::{load_scenario, Cell, OccupancyGrid, Scenario};
use langmap::symbols::BehaviorType;
use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scenario(name: &str) -> Scenario {
    load_scenario(&langmap::data_dir().join("scenarios").join(format!("{name}.json"))).unwrap()
}

// 1 ----------------------------------------------------------------------

fn value_function() -> Outcome {
    let a = psi(0.0);
    let b = psi(10f64.sqrt());
    let c = psi(10.0);
    let pass = a == 1.0 && (b - (-1f64).exp()).abs() <= 1e-12 && (c - (-10f64).exp()).abs() <= 1e-15;
    outcome(pass, format!("psi(0)={a}, psi(sqrt 10)={b:.15}, psi(10)={c:.6e}"))
}

// 2 ----------------------------------------------------------------------

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
    loop {
        let n = rng.random_range(1..=4);
        let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4)).collect();
        if sizes.iter().sum::<usize>() > 16 {
            continue;
        }
        let mut children = vec![Vec::new(); n];
        for c in 1..n {
            if rng.random_bool(0.85) {
                children[rng.random_range(0..c)].push(c);
            }
        }
        return FactorGraph::from_shape(&sizes, &children).unwrap();
    }
}

fn dcg_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut agree = 0;
    for _ in 0..100 {
        let g = random_graph(&mut rng);
        let s = PairScorer::random(&g, &mut rng);
        let dp = infer(&g, &s, Beam::Unbounded);
        let bf = brute_force_infer(&g, &s).unwrap();
        if dp.values == bf.values {
            agree += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(agree == 100 && secs < 10.0, format!("{agree}/100 identical, {secs:.2} s"))
}

// 3 ----------------------------------------------------------------------

fn gradient_check() -> Outcome {
    let v = assets::vocabulary().unwrap();
    let corpus = assets::corpus(&v).unwrap();
    let cfg = TrainConfig::default();
    let set = build_training_set(&corpus, Head::Behavior, &v, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let w: Vec<f64> = (0..set.features.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = set.gradient(&w, cfg.l2);
        let fd: Vec<f64> = (0..w.len())
            .into_par_iter()
            .map(|i| {
                let mut wp = w.clone();
                wp[i] += h;
                let mut wm = w.clone();
                wm[i] -= h;
                (set.objective(&wp, cfg.l2) - set.objective(&wm, cfg.l2)) / (2.0 * h)
            })
            .collect();
        for (a, n) in g.iter().zip(&fd) {
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
    }
    outcome(
        worst <= 1e-4,
        format!("{} weights x 10 points, max relative error {worst:.2e}", set.features.len()),
    )
}

// 4 ----------------------------------------------------------------------

fn corpus_competence() -> Outcome {
    let v = assets::vocabulary().unwrap();
    let corpus = assets::corpus(&v).unwrap();
    let cfg = TrainConfig::default();
    let results: Vec<(usize, usize, bool)> = (0..corpus.len())
        .into_par_iter()
        .map(|k| {
            let rest = corpus.without(k);
            let entry = &corpus.entries[k];
            let tree = &entry.instruction.tree;
            let behavior = train(&rest, Head::Behavior, &v, &cfg).unwrap().0;
            let mut correct = 0;
            let mut total = 0;
            for variant in 0..2 {
                let fx = fixture_world(tree, &v, 1_000_003 + k as u64, variant).unwrap();
                total += 1;
                if let Ok(b) = infer_behavior(&behavior, tree, &fx.world, &v, Beam::default()) {
                    if b.behavior == entry.behavior.behavior && b.goal == fx.target {
                        correct += 1;
                    }
                }
            }
            let detector = train(&rest, Head::Perception, &v, &cfg).unwrap().0;
            let dets = infer_detectors(&detector, tree, &v, Beam::default()).unwrap();
            (correct, total, dets == entry.detectors)
        })
        .collect();
    let (bc, bt) = results.iter().fold((0, 0), |(c, t), r| (c + r.0, t + r.1));
    let dc = results.iter().filter(|r| r.2).count();
    let ba = bc as f64 / bt as f64;
    let da = dc as f64 / corpus.len() as f64;
    outcome(
        ba >= 0.90 && da >= 0.95,
        format!(
            "leave-one-out over {}: behavior {:.1}% ({bc}/{bt}), detector {:.1}% ({dc}/{})",
            corpus.len(),
            100.0 * ba,
            100.0 * da,
            corpus.len()
        ),
    )
}

// 5 ----------------------------------------------------------------------

struct ChainEdge {
    from: usize,
    to: usize,
    z: Pose2,
    info: Matrix3<f64>,
}

/// Residual of a relative pose measurement, written out directly.
fn edge_residual(x: &DVector<f64>, e: &ChainEdge) -> [f64; 3] {
    let (ax, ay, at) = (x[3 * e.from], x[3 * e.from + 1], x[3 * e.from + 2]);
    let (bx, by, bt) = (x[3 * e.to], x[3 * e.to + 1], x[3 * e.to + 2]);
    let (s, c) = at.sin_cos();
    let dx = bx - ax;
    let dy = by - ay;
    [
        c * dx + s * dy - e.z.x,
        -s * dx + c * dy - e.z.y,
        wrap_angle(bt - at - e.z.theta),
    ]
}

/// Dense Gauss-Newton with finite-difference Jacobians over the whole
/// stacked state, first pose held by a stiff anchor at the origin.
fn dense_least_squares(x0: DVector<f64>, edges: &[ChainEdge], anchor: f64) -> DVector<f64> {
    let n = x0.len();
    let whitened = |x: &DVector<f64>| -> DVector<f64> {
        let mut r = Vec::with_capacity(3 * edges.len() + 3);
        for e in edges {
            let res = nalgebra::Vector3::from(edge_residual(x, e));
            let l = e.info.cholesky().unwrap().l();
            let w = l.transpose() * res;
            r.extend(w.iter());
        }
        let s = anchor.sqrt();
        r.push(s * x[0]);
        r.push(s * x[1]);
        r.push(s * wrap_angle(x[2]));
        DVector::from_vec(r)
    };
    let mut x = x0;
    for _ in 0..200 {
        let r = whitened(&x);
        let mut j = DMatrix::zeros(r.len(), n);
        let h = 1e-7;
        for k in 0..n {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let d = (whitened(&xp) - whitened(&xm)) / (2.0 * h);
            j.set_column(k, &d);
        }
        let jt = j.transpose();
        let step = (&jt * &j).lu().solve(&(-(&jt * &r))).unwrap();
        x += &step;
        if step.amax() < 1e-13 {
            break;
        }
    }
    x
}

fn eif_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let anchor = 1e8;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut truth = vec![Pose2::origin()];
        for _ in 1..10 {
            let step = Pose2::new(rng.random_range(0.5..1.5), rng.random_range(-0.3..0.3), rng.random_range(-0.6..0.6));
            truth.push(truth.last().unwrap().compose(step));
        }
        let noisy = |p: Pose2, rng: &mut ChaCha8Rng| {
            Pose2::new(
                p.x + rng.random_range(-0.05..0.05),
                p.y + rng.random_range(-0.05..0.05),
                p.theta + rng.random_range(-0.03..0.03),
            )
        };
        let mut edges = Vec::new();
        for i in 0..9 {
            let z = noisy(truth[i].between(truth[i + 1]), &mut rng);
            let info = Matrix3::from_diagonal(&nalgebra::Vector3::new(
                rng.random_range(20.0..80.0),
                rng.random_range(20.0..80.0),
                rng.random_range(50.0..200.0),
            ));
            edges.push(ChainEdge { from: i, to: i + 1, z, info });
        }
        let a = rng.random_range(0..4);
        let b = rng.random_range(6..10);
        edges.push(ChainEdge {
            from: a,
            to: b,
            z: noisy(truth[a].between(truth[b]), &mut rng),
            info: Matrix3::identity() * 30.0,
        });

        // Initial guess: dead reckoning from the measurements.
        let mut init = vec![Pose2::origin()];
        for e in &edges[..9] {
            init.push(init.last().unwrap().compose(e.z));
        }

        let mut g = SemanticGraph::new(assets::vocabulary().unwrap().type_names().clone(), 0.1);
        let ids: Vec<NodeId> = init.iter().map(|&p| g.add_robot_pose(p)).collect();
        g.anchor(ids[0], Pose2::origin(), Matrix3::identity() * anchor);
        for e in &edges {
            g.add_edge(Edge {
                from: ids[e.from],
                to: ids[e.to],
                measurement: e.z,
                information: e.info,
                kind: if e.to == e.from + 1 { EdgeKind::Odometry } else { EdgeKind::LoopClosure },
            });
        }
        let solved = eif_solve(&mut g, SolveMode::Batch).unwrap();

        let x0 = DVector::from_iterator(30, init.iter().flat_map(|p| [p.x, p.y, p.theta]));
        let x = dense_least_squares(x0, &edges, anchor);
        for (i, id) in ids.iter().enumerate() {
            let p = solved[id];
            worst = worst
                .max((p.x - x[3 * i]).abs())
                .max((p.y - x[3 * i + 1]).abs())
                .max(wrap_angle(p.theta - x[3 * i + 2]).abs());
        }
    }
    outcome(worst <= 1e-6, format!("20 loop-closed chains, max coordinate difference {worst:.2e}"))
}

// 6 ----------------------------------------------------------------------

fn fixture_run(pipeline: &Pipeline, seed: u64) -> Executive {
    let sc = scenario("fixture");
    let mut exec = pipeline.executive(&sc, &serde_json::Value::Null, Mode::Adaptive, seed).unwrap();
    for _ in 0..500 {
        exec.step().unwrap();
    }
    exec
}

fn filter_invariants(pipeline: &Pipeline) -> Outcome {
    let a = fixture_run(pipeline, 17);
    let b = fixture_run(pipeline, 17);
    let n = a.set.len() as f64;
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    let mut resamples = 0;
    for r in &a.trace {
        worst = worst
            .max((r.weight_sum_after_reweight - 1.0).abs())
            .max((r.weight_sum_after_resample - 1.0).abs());
        if r.resampled != (r.ess < n / 2.0) {
            mismatched += 1;
        }
        resamples += usize::from(r.resampled);
    }
    let identical = a.trace == b.trace && a.path == b.path;
    outcome(
        a.trace.len() == 500 && worst <= 1e-9 && mismatched == 0 && identical,
        format!(
            "500 cycles, max |sum w - 1| {worst:.1e}, {resamples} resamples, {mismatched} trigger mismatches, replay identical: {identical}"
        ),
    )
}

// 7 ----------------------------------------------------------------------

/// Plain Dijkstra with its own move rules: 8-connected, diagonal steps need
/// both orthogonal cells free.
fn dijkstra(free: &[Vec<bool>], start: (usize, usize), goal: (usize, usize)) -> Option<f64> {
    let (w, h) = (free[0].len() as i64, free.len() as i64);
    let ok = |c: i64, r: i64| c >= 0 && r >= 0 && c < w && r < h && free[r as usize][c as usize];
    let mut dist = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    // Integer-scaled costs keep the heap ordering exact.
    let scale = 1e9;
    heap.push(Reverse((0u64, start.0 as i64, start.1 as i64)));
    dist.insert((start.0 as i64, start.1 as i64), 0u64);
    while let Some(Reverse((d, c, r))) = heap.pop() {
        if (c as usize, r as usize) == goal {
            return Some(d as f64 / scale);
        }
        if dist.get(&(c, r)).is_some_and(|&best| best < d) {
            continue;
        }
        for dc in -1..=1i64 {
            for dr in -1..=1i64 {
                if (dc, dr) == (0, 0) || !ok(c + dc, r + dr) {
                    continue;
                }
                let diag = dc != 0 && dr != 0;
                if diag && !(ok(c + dc, r) && ok(c, r + dr)) {
                    continue;
                }
                let step = if diag { (std::f64::consts::SQRT_2 * scale).round() as u64 } else { scale as u64 };
                let nd = d + step;
                if dist.get(&(c + dc, r + dr)).is_none_or(|&best| nd < best) {
                    dist.insert((c + dc, r + dr), nd);
                    heap.push(Reverse((nd, c + dc, r + dr)));
                }
            }
        }
    }
    None
}

fn planner_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut agree = 0;
    let mut reachable = 0;
    for _ in 0..100 {
        let density = rng.random_range(0.15..0.35);
        let mut free: Vec<Vec<bool>> = (0..32).map(|_| (0..32).map(|_| !rng.random_bool(density)).collect()).collect();
        let start = (rng.random_range(0..32usize), rng.random_range(0..32usize));
        let goal = (rng.random_range(0..32usize), rng.random_range(0..32usize));
        free[start.1][start.0] = true;
        free[goal.1][goal.0] = true;
        let mut grid = OccupancyGrid::new(32, 32, 1.0);
        for (r, row) in free.iter().enumerate() {
            for (c, &f) in row.iter().enumerate() {
                grid.set_occupied(Cell::new(c as i32, r as i32), !f);
            }
        }
        let astar = plan_path(
            &grid,
            Cell::new(start.0 as i32, start.1 as i32),
            Cell::new(goal.0 as i32, goal.1 as i32),
        )
        .ok()
        .map(|t| t.length);
        let oracle = dijkstra(&free, start, goal);
        reachable += usize::from(oracle.is_some());
        let same = match (astar, oracle) {
            (Some(a), Some(o)) => (a - o).abs() <= 1e-6,
            (None, None) => true,
            _ => false,
        };
        agree += usize::from(same);
    }
    outcome(agree == 100, format!("{agree}/100 mazes agree ({reachable} reachable)"))
}

// 8 ----------------------------------------------------------------------

fn table_trends(pipeline: &Pipeline) -> Outcome {
    let t0 = Instant::now();
    let sc = scenario("controlled_indoor");
    let r = compare(pipeline, &sc, &serde_json::Value::Null, &[0, 1, 2, 3, 4]).unwrap();
    let (ap, ep) = (&r.adaptive, &r.exhaustive);
    let a = ap.loop_period <= 0.25 * ep.loop_period
        && (ap.loop_period - 0.70).abs() <= 0.20 * 0.70
        && (ep.loop_period - 4.14).abs() <= 0.20 * 4.14;
    let b = ap.detected < ep.detected && ap.detected <= 12.0 && ep.detected >= 18.0;
    let c = ap.task1 < ep.task1;
    let ap_replay = r.trials_for(Mode::Adaptive).all(|t| t.metrics.replay_time_s > 0.0);
    let ep_replay = r.trials_for(Mode::Exhaustive).all(|t| t.metrics.replay_time_s == 0.0);
    let d = ap_replay && ep_replay;
    outcome(
        a && b && c && d,
        format!(
            "loop {:.3}/{:.3} s [{}], detected {:.1}/{:.1} [{}], task1 {:.1}/{:.1} s [{}], replay {:.2}/{:.2} s [{}], {:.1} s",
            ap.loop_period,
            ep.loop_period,
            if a { "a ok" } else { "a FAIL" },
            ap.detected,
            ep.detected,
            if b { "b ok" } else { "b FAIL" },
            ap.task1,
            ep.task1,
            if c { "c ok" } else { "c FAIL" },
            ap.replay,
            ep.replay,
            if d { "d ok" } else { "d FAIL" },
            t0.elapsed().as_secs_f64()
        ),
    )
}

// 9 ----------------------------------------------------------------------

/// First cycle of task 1 whose selected goal lies near `object`.
fn first_selected_near(exec: &Executive, object: &str, until: u64) -> Option<u64> {
    let o = exec.scenario.env.objects.iter().find(|o| o.id == object)?;
    exec.trace
        .iter()
        .take_while(|r| r.cycle <= until)
        .find(|r| r.selected.as_ref().is_some_and(|b| b.goal.distance(o.pose) <= 1.0))
        .map(|r| r.cycle)
}

fn task_completion(pipeline: &Pipeline) -> Outcome {
    let jobs: Vec<(&str, Mode, u64)> = ["controlled_indoor", "exploratory_outdoor"]
        .into_iter()
        .flat_map(|s| [Mode::Adaptive, Mode::Exhaustive].into_iter().flat_map(move |m| (0..5).map(move |k| (s, m, k))))
        .collect();
    let runs: Vec<(&str, Mode, bool, bool)> = jobs
        .par_iter()
        .map(|&(s, mode, seed)| {
            let sc = scenario(s);
            let mut exec = pipeline.executive(&sc, &serde_json::Value::Null, mode, seed).unwrap();
            let _ = exec.run();
            let done = exec.tasks.first().and_then(|t| t.completed_cycle);
            let decoy_first = done.is_some_and(|until| {
                match (
                    first_selected_near(&exec, "decoy_box", until),
                    first_selected_near(&exec, "target_box", until),
                ) {
                    (Some(d), Some(t)) => d < t,
                    _ => false,
                }
            });
            (s, mode, done.is_some(), decoy_first)
        })
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for s in ["controlled_indoor", "exploratory_outdoor"] {
        for m in [Mode::Adaptive, Mode::Exhaustive] {
            let mine: Vec<_> = runs.iter().filter(|r| r.0 == s && r.1 == m).collect();
            let done = mine.iter().filter(|r| r.2).count();
            let decoy = mine.iter().filter(|r| r.3).count();
            pass &= done >= 4 && decoy == done;
            parts.push(format!("{s} {m}: {done}/5 done, decoy first {decoy}/{done}"));
        }
    }
    outcome(pass, parts.join("; "))
}

// 10 ---------------------------------------------------------------------

fn policy_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let kinds = [BehaviorType::Navigate, BehaviorType::Retrieve, BehaviorType::Pickup];
    let mut stable = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..=12);
        let robot = Pose2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), 0.0);
        let behaviors: Vec<Behavior> = (0..n)
            .map(|i| Behavior {
                kind: kinds[rng.random_range(0..3)],
                goal: Pose2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), 0.0),
                goal_node: NodeId(i as u32),
                particle: i,
                likelihood: rng.random_range(0.05..1.0),
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let sum: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / sum).collect();
        let pick = |scale: f64| {
            let ws: Vec<f64> = w.iter().map(|x| x * scale).collect();
            select_behavior(&behaviors, &ws, robot, PSI_SCALE).unwrap().particle
        };
        let base = pick(1.0);
        if pick(7.3) == base && pick(0.001) == base {
            stable += 1;
        }
    }
    outcome(stable == 50, format!("{stable}/50 ensembles keep their argmax"))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let t0 = Instant::now();
    let pipeline = Pipeline::shipped().expect("shipped pipeline trains");
    let criteria: Vec<Criterion<'_>> = vec![
        ("value function", Box::new(value_function)),
        ("dcg exact inference", Box::new(dcg_oracle)),
        ("training gradient", Box::new(gradient_check)),
        ("corpus competence", Box::new(corpus_competence)),
        ("eif batch solve", Box::new(eif_oracle)),
        ("filter invariants", Box::new(|| filter_invariants(&pipeline))),
        ("path planner", Box::new(planner_oracle)),
        ("efficiency trends", Box::new(|| table_trends(&pipeline))),
        ("task completion", Box::new(|| task_completion(&pipeline))),
        ("policy invariance", Box::new(policy_invariance)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
