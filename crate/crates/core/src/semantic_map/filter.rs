//! Rao-Blackwellized particle filter over semantic graphs: topology is
//! sampled per particle, the metric layer is solved in information form.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::coverage::{in_cone, CoverageGrid};
use super::eif::{eif_solve, marginalize, SolveMode};
use super::graph::{Edge, EdgeKind, NodeId, NodeKind, PriorKind, SemanticGraph, UnaryPrior};
use super::pose::{between_residual, Pose2};
use super::MapError;
use crate::rng::{purpose, stream_rng};
use crate::simworld::OccupancyGrid;
use crate::symbols::{AnnotationSymbol, Relation, INSIDE_RADIUS, SIDE_OFFSET};

/// 0.99 quantile of the chi-square distribution with 3 degrees of freedom.
pub const CHI2_3_99: f64 = 11.344866730144373;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub particles: usize,
    /// Per-step odometry noise (x, y, theta).
    pub motion_sigma: [f64; 3],
    /// Relative-pose detection noise (x, y, theta).
    pub detection_sigma: [f64; 3],
    pub anchor_sigma: f64,
    pub gate: f64,
    pub miss_probability: f64,
    pub annotation_threshold: f64,
    pub dirichlet_prior: f64,
    /// Association log-likelihood charged for spawning a new node.
    pub new_node_log_likelihood: f64,
    /// Position spread of a hypothesized node's placement prior.
    pub hypothesis_sigma: f64,
    pub relation_sigma: f64,
    pub inside_offset_sigma: f64,
    /// Placement distance for near / left-of / right-of hypotheses.
    pub side_distance: f64,
    pub inspection_radius: f64,
    /// The map-side visibility tests shrink range and inspection radius by
    /// this much so estimation error does not produce false misses.
    pub visibility_margin: f64,
    pub prune_after_misses: u32,
    #[serde(skip)]
    pub solve_mode: SolveMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 10,
            motion_sigma: [0.01, 0.01, 0.005],
            detection_sigma: [0.05, 0.05, 0.3],
            anchor_sigma: 0.01,
            gate: CHI2_3_99,
            miss_probability: 0.3,
            annotation_threshold: 0.5,
            dirichlet_prior: 0.1,
            new_node_log_likelihood: -8.0,
            hypothesis_sigma: 0.75,
            relation_sigma: 0.15,
            inside_offset_sigma: 0.1,
            side_distance: 1.0,
            inspection_radius: 1.0,
            visibility_margin: 0.2,
            prune_after_misses: 2,
            solve_mode: SolveMode::SingleStep,
        }
    }
}

/// Object detection relative to the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub classifier: String,
    pub type_name: String,
    pub relative: Pose2,
    pub range: f64,
    pub color: Option<String>,
}

/// Sensor state the reweighting step needs to reason about misses.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorContext {
    pub range: f64,
    pub fov: f64,
    pub active_types: BTreeSet<String>,
}

/// Shared inputs for annotation-driven hypothesis placement.
pub struct AnnotationContext<'a> {
    pub grid: &'a OccupancyGrid,
    pub coverage: &'a CoverageGrid,
    pub seed: u64,
    pub cycle: u64,
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub graph: SemanticGraph,
    pub log_weight: f64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub detection: usize,
    pub node: NodeId,
    pub created: bool,
    pub confirmed: bool,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    pub associations: Vec<Association>,
}

impl UpdateReport {
    pub fn log_likelihood(&self) -> f64 {
        self.associations.iter().map(|a| a.log_likelihood).sum()
    }

    pub fn associated_nodes(&self) -> BTreeSet<NodeId> {
        self.associations.iter().map(|a| a.node).collect()
    }

    /// Whether the update added or confirmed nodes.
    pub fn changed_topology(&self) -> bool {
        self.associations.iter().any(|a| a.created || a.confirmed)
    }
}

#[derive(Debug, Clone)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub cycle: u64,
    pub config: FilterConfig,
    next_stream: u64,
}

fn diag_info(sigma: [f64; 3]) -> Matrix3<f64> {
    let f = |s: f64| 1.0 / s.max(1e-3).powi(2);
    Matrix3::from_diagonal(&Vector3::new(f(sigma[0]), f(sigma[1]), f(sigma[2])))
}

impl ParticleSet {
    /// `n` identical particles, each anchored at `start`.
    pub fn new(types: Arc<[String]>, start: Pose2, config: FilterConfig) -> Result<Self, MapError> {
        let n = config.particles.max(1);
        let mut graph = SemanticGraph::new(types, config.dirichlet_prior);
        let r = graph.add_robot_pose(start);
        graph.anchor(r, start, diag_info([config.anchor_sigma; 3]));
        eif_solve(&mut graph, config.solve_mode)?;
        let lw = -(n as f64).ln();
        let particles = (0..n as u64)
            .map(|stream| Particle {
                graph: graph.clone(),
                log_weight: lw,
                stream,
            })
            .collect();
        Ok(Self {
            particles,
            cycle: 0,
            config,
            next_stream: n as u64,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight.exp()).collect()
    }

    /// Rescales log-weights so the weights sum to one.
    pub fn normalize(&mut self) -> Result<(), MapError> {
        let max = self
            .particles
            .iter()
            .map(|p| p.log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(MapError::DegenerateWeights);
        }
        let sum: f64 = self.particles.iter().map(|p| (p.log_weight - max).exp()).sum();
        let log_z = max + sum.ln();
        for p in &mut self.particles {
            p.log_weight -= log_z;
        }
        Ok(())
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights().iter().map(|w| w * w).sum::<f64>()
    }

    /// Index of the highest-weight particle, ties to the lower index.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.particles.iter().enumerate() {
            if p.log_weight > self.particles[best].log_weight {
                best = i;
            }
        }
        best
    }

    /// Systematic resampling when ESS drops below N/2. Returns whether it ran.
    pub fn resample(&mut self, seed: u64) -> bool {
        let n = self.particles.len();
        if self.ess() >= n as f64 / 2.0 {
            return false;
        }
        let weights = self.weights();
        let mut rng = stream_rng(seed, &[purpose::RESAMPLE, self.cycle]);
        let u0: f64 = rng.random::<f64>() / n as f64;
        let mut picks = Vec::with_capacity(n);
        let mut acc = weights[0];
        let mut i = 0;
        for k in 0..n {
            let u = u0 + k as f64 / n as f64;
            while u > acc && i + 1 < n {
                i += 1;
                acc += weights[i];
            }
            picks.push(i);
        }
        let lw = -(n as f64).ln();
        let old = std::mem::take(&mut self.particles);
        self.particles = picks
            .into_iter()
            .map(|i| {
                let stream = self.next_stream;
                self.next_stream += 1;
                Particle {
                    graph: old[i].graph.clone(),
                    log_weight: lw,
                    stream,
                }
            })
            .collect();
        true
    }

    /// Hash of every weight, pose and count in the set; equal digests mean
    /// bit-identical filter states for practical purposes.
    pub fn digest(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.cycle.hash(&mut h);
        for p in &self.particles {
            p.log_weight.to_bits().hash(&mut h);
            p.stream.hash(&mut h);
            for n in p.graph.nodes() {
                n.id.hash(&mut h);
                n.hypothesized.hash(&mut h);
                n.pose.x.to_bits().hash(&mut h);
                n.pose.y.to_bits().hash(&mut h);
                n.pose.theta.to_bits().hash(&mut h);
                for c in &n.semantic {
                    c.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }
}

/// Appends a noise-perturbed robot pose, folds the previous pose into the
/// marginal prior and refreshes the metric layer.
pub fn predict(particle: &mut Particle, u: Pose2, config: &FilterConfig, seed: u64, cycle: u64) -> Result<(), MapError> {
    let graph = &mut particle.graph;
    let old = graph.robot().ok_or(MapError::InvariantViolation("no robot pose".into()))?;
    let mut rng = stream_rng(seed, &[purpose::MOTION, particle.stream, cycle]);
    let mut noisy = [u.x, u.y, u.theta];
    for (k, s) in config.motion_sigma.iter().enumerate() {
        if *s > 0.0 {
            noisy[k] += Normal::new(0.0, *s).expect("finite sigma").sample(&mut rng);
        }
    }
    let step = Pose2::new(noisy[0], noisy[1], noisy[2]);
    let start = graph.node(old).expect("robot node").pose;
    let new = graph.add_robot_pose(start.compose(step));
    graph.add_edge(Edge {
        from: old,
        to: new,
        measurement: step,
        information: diag_info(config.motion_sigma),
        kind: EdgeKind::Odometry,
    });
    marginalize(graph, old)?;
    eif_solve(graph, config.solve_mode)?;
    Ok(())
}

/// Innovation statistics of detection `z` against landmark `l`.
fn innovation(graph: &SemanticGraph, robot: NodeId, l: NodeId, z: Pose2, r: &Matrix3<f64>) -> Option<(f64, f64)> {
    let metric = graph.metric()?;
    let (rs, ls) = (metric.slot(robot)?, metric.slot(l)?);
    let n = metric.index.len() * 3;
    let mut rhs = DMatrix::zeros(n, 6);
    for k in 0..3 {
        rhs[(3 * rs + k, k)] = 1.0;
        rhs[(3 * ls + k, 3 + k)] = 1.0;
    }
    let sol = metric.factor.solve(&rhs);
    let mut cov = DMatrix::zeros(6, 6);
    let rows = [3 * rs, 3 * rs + 1, 3 * rs + 2, 3 * ls, 3 * ls + 1, 3 * ls + 2];
    for (i, &row) in rows.iter().enumerate() {
        for c in 0..6 {
            cov[(i, c)] = sol[(row, c)];
        }
    }
    let rp = graph.node(robot)?.pose;
    let lp = graph.node(l)?.pose;
    let (e, ja, jb) = between_residual(rp, lp, z);
    let mut j = DMatrix::zeros(3, 6);
    j.view_mut((0, 0), (3, 3)).copy_from(&ja);
    j.view_mut((0, 3), (3, 3)).copy_from(&jb);
    let s = &j * cov * j.transpose() + DMatrix::from_fn(3, 3, |a, b| r[(a, b)]);
    let s = Matrix3::from_fn(|a, b| s[(a, b)]);
    let s_inv = s.try_inverse()?;
    let chi2 = (e.transpose() * s_inv * e)[(0, 0)];
    let log_det = s.determinant().ln();
    let loglik = -0.5 * chi2 - 0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + log_det);
    Some((chi2, loglik))
}

/// Gated nearest-neighbour association of each detection, then one
/// information update for the whole frame.
pub fn update_observations(
    particle: &mut Particle,
    detections: &[Detection],
    config: &FilterConfig,
) -> Result<UpdateReport, MapError> {
    let mut report = UpdateReport::default();
    if detections.is_empty() {
        return Ok(report);
    }
    let graph = &mut particle.graph;
    if graph.metric().is_none() {
        eif_solve(graph, config.solve_mode)?;
    }
    let robot = graph.robot().ok_or(MapError::InvariantViolation("no robot pose".into()))?;
    let rp = graph.node(robot).expect("robot node").pose;
    let det_cov = {
        let s = config.detection_sigma;
        Matrix3::from_diagonal(&Vector3::new(s[0] * s[0], s[1] * s[1], s[2] * s[2]))
    };
    let existing: Vec<NodeId> = graph.landmarks().map(|n| n.id).collect();
    let mut used = BTreeSet::new();
    let mut plan = Vec::new();
    for (k, det) in detections.iter().enumerate() {
        let mut best: [Option<(f64, f64, NodeId)>; 2] = [None, None];
        for &id in &existing {
            if used.contains(&id) || graph.map_type(id) != Some(det.type_name.as_str()) {
                continue;
            }
            let Some((chi2, ll)) = innovation(graph, robot, id, det.relative, &det_cov) else {
                continue;
            };
            if chi2 >= config.gate {
                continue;
            }
            let slot = usize::from(graph.node(id).expect("listed").hypothesized);
            if best[slot].is_none_or(|(c, _, _)| chi2 < c) {
                best[slot] = Some((chi2, ll, id));
            }
        }
        let choice = best[0].or(best[1]);
        if let Some((_, _, id)) = choice {
            used.insert(id);
        }
        plan.push((k, choice));
    }
    for (k, choice) in plan {
        let det = &detections[k];
        let (node, created, confirmed, ll) = match choice {
            Some((_, ll, id)) => {
                let hyp = graph.node(id).expect("listed").hypothesized;
                if hyp {
                    graph.confirm(id);
                }
                graph.observe_type(id, &det.type_name);
                (id, false, hyp, ll)
            }
            None => {
                let id = graph.add_landmark(NodeKind::Object, &det.type_name, rp.compose(det.relative), false);
                (id, true, false, config.new_node_log_likelihood)
            }
        };
        if let (Some(c), Some(n)) = (&det.color, graph.node_mut(node)) {
            n.color.get_or_insert_with(|| c.clone());
        }
        graph.add_edge(Edge {
            from: robot,
            to: node,
            measurement: det.relative,
            information: diag_info(config.detection_sigma),
            kind: EdgeKind::Observation,
        });
        report.associations.push(Association {
            detection: k,
            node,
            created,
            confirmed,
            log_likelihood: ll,
        });
    }
    eif_solve(graph, config.solve_mode)?;
    Ok(report)
}

/// Removes a hypothesized node and, recursively, hypotheses placed inside it.
fn prune(graph: &mut SemanticGraph, id: NodeId) {
    let inner: Vec<NodeId> = graph
        .landmarks()
        .filter(|n| n.hypothesized && n.container == Some(id))
        .map(|n| n.id)
        .collect();
    for c in inner {
        prune(graph, c);
    }
    graph.remove_node_raw(id);
}

/// Whether a map node should have been seen from `rp` if it existed.
fn expected_visible(graph: &SemanticGraph, id: NodeId, rp: Pose2, sensor: &SensorContext, config: &FilterConfig) -> bool {
    let node = graph.node(id).expect("listed");
    match node.container.and_then(|c| graph.node(c)) {
        Some(c) => rp.distance(c.pose) <= config.inspection_radius - config.visibility_margin,
        None => in_cone(rp, node.pose, sensor.range - config.visibility_margin, sensor.fov),
    }
}

/// Adds association likelihoods and negative information, records which
/// containers have been searched, prunes repeatedly missed hypotheses and
/// renormalizes.
pub fn reweight(
    set: &mut ParticleSet,
    reports: &[UpdateReport],
    detections: &[Detection],
    sensor: &SensorContext,
) -> Result<bool, MapError> {
    let config = set.config.clone();
    let miss_ll = config.miss_probability.ln();
    let mut pruned_any = false;
    for (p, report) in set.particles.iter_mut().zip(reports) {
        p.log_weight += report.log_likelihood();
        let graph = &mut p.graph;
        let Some(rp) = graph.robot_pose() else { continue };
        let seen = report.associated_nodes();
        let mut missed = Vec::new();
        for n in graph.landmarks() {
            if !n.hypothesized || seen.contains(&n.id) {
                continue;
            }
            let Some(t) = graph.map_type(n.id) else { continue };
            if sensor.active_types.contains(t) && expected_visible(graph, n.id, rp, sensor, &config) {
                missed.push(n.id);
            }
        }
        let mut prune_ids = Vec::new();
        for id in missed {
            p.log_weight += miss_ll;
            let n = graph.node_mut(id).expect("listed");
            n.misses += 1;
            if n.misses >= config.prune_after_misses {
                prune_ids.push(id);
            }
        }
        for id in prune_ids {
            if graph.contains(id) {
                prune(graph, id);
                pruned_any = true;
            }
        }

        let global: Vec<(&str, Pose2)> = detections
            .iter()
            .map(|d| (d.type_name.as_str(), rp.compose(d.relative)))
            .collect();
        let near: Vec<NodeId> = graph
            .landmarks()
            .filter(|n| !n.hypothesized && rp.distance(n.pose) <= config.inspection_radius - config.visibility_margin)
            .map(|n| n.id)
            .collect();
        for id in near {
            let lp = graph.node(id).expect("listed").pose;
            for t in &sensor.active_types {
                let found = global
                    .iter()
                    .any(|(dt, g)| dt == t && g.distance(lp) <= INSIDE_RADIUS);
                if !found {
                    graph.node_mut(id).expect("listed").inspected.insert(t.clone());
                }
            }
        }
        if pruned_any && graph.metric().is_none() && !graph.is_empty() {
            eif_solve(graph, config.solve_mode)?;
        }
    }
    set.normalize()?;
    Ok(pruned_any)
}

fn relation_satisfied(graph: &SemanticGraph, relation: Relation, subject: &str, landmark: &str) -> bool {
    let subjects: Vec<_> = graph
        .landmarks()
        .filter(|n| graph.map_type(n.id) == Some(subject))
        .collect();
    graph
        .landmarks()
        .filter(|n| graph.map_type(n.id) == Some(landmark))
        .any(|l| subjects.iter().any(|s| relation.holds(s, l)))
}

fn hypothesis_prior(graph: &mut SemanticGraph, id: NodeId, pose: Pose2, config: &FilterConfig) {
    let s = config.hypothesis_sigma;
    graph.add_prior(UnaryPrior {
        node: id,
        mean: pose,
        information: diag_info([s, s, std::f64::consts::PI]),
        kind: PriorKind::Hypothesis,
    });
}

/// Adds one hypothesized node per unsatisfied annotation scoring at least
/// the threshold: relation annotations first (placing the subject relative
/// to an eligible or newly hypothesized landmark), then bare types.
/// Returns the number of nodes added across all particles.
pub fn apply_annotations(
    set: &mut ParticleSet,
    annotations: &[(AnnotationSymbol, f64)],
    ctx: &AnnotationContext<'_>,
) -> Result<usize, MapError> {
    let config = set.config.clone();
    let active: Vec<&AnnotationSymbol> = {
        let mut rel: Vec<_> = annotations
            .iter()
            .filter(|(a, s)| *s >= config.annotation_threshold && matches!(a, AnnotationSymbol::Relation { .. }))
            .map(|(a, _)| a)
            .collect();
        rel.extend(
            annotations
                .iter()
                .filter(|(a, s)| *s >= config.annotation_threshold && matches!(a, AnnotationSymbol::Type(_)))
                .map(|(a, _)| a),
        );
        rel
    };
    let mut added = 0;
    for p in &mut set.particles {
        let mut rng = stream_rng(ctx.seed, &[purpose::ANNOTATION, p.stream, ctx.cycle]);
        let graph = &mut p.graph;
        let before = graph.len();
        for ann in &active {
            match ann {
                AnnotationSymbol::Type(t) => {
                    let exists = graph.landmarks().any(|n| graph.map_type(n.id) == Some(t.as_str()));
                    let Some(ti) = graph.type_index(t) else { continue };
                    if exists {
                        continue;
                    }
                    if let Some(pose) = ctx.coverage.sample_unexplored(ctx.grid, ti, &mut rng) {
                        let id = graph.add_landmark(NodeKind::Object, t, pose, true);
                        hypothesis_prior(graph, id, pose, &config);
                    }
                }
                AnnotationSymbol::Relation {
                    relation,
                    subject,
                    landmark,
                } => {
                    if graph.type_index(subject).is_none() || graph.type_index(landmark).is_none() {
                        continue;
                    }
                    if relation_satisfied(graph, *relation, subject, landmark) {
                        continue;
                    }
                    let eligible: Vec<NodeId> = graph
                        .landmarks()
                        .filter(|n| graph.map_type(n.id) == Some(landmark.as_str()))
                        .filter(|n| *relation != Relation::Inside || !n.inspected.contains(subject.as_str()))
                        .map(|n| n.id)
                        .collect();
                    let pick = rng.random_range(0..=eligible.len());
                    let anchor = if pick < eligible.len() {
                        eligible[pick]
                    } else {
                        let ti = graph.type_index(landmark).expect("checked");
                        let Some(pose) = ctx.coverage.sample_unexplored(ctx.grid, ti, &mut rng) else {
                            continue;
                        };
                        let id = graph.add_landmark(NodeKind::Object, landmark, pose, true);
                        hypothesis_prior(graph, id, pose, &config);
                        id
                    };
                    let lp = graph.node(anchor).expect("anchor").pose;
                    let d = config.side_distance;
                    let pose = match relation {
                        Relation::Inside => {
                            let n = Normal::new(0.0, config.inside_offset_sigma).expect("finite sigma");
                            Pose2::new(lp.x + n.sample(&mut rng), lp.y + n.sample(&mut rng), 0.0)
                        }
                        Relation::Near => {
                            let a: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                            Pose2::new(lp.x + d * a.cos(), lp.y + d * a.sin(), 0.0)
                        }
                        Relation::LeftOf => Pose2::new(lp.x, lp.y + d.max(SIDE_OFFSET), 0.0),
                        Relation::RightOf => Pose2::new(lp.x, lp.y - d.max(SIDE_OFFSET), 0.0),
                    };
                    let id = graph.add_landmark(NodeKind::Object, subject, pose, true);
                    if *relation == Relation::Inside {
                        graph.node_mut(id).expect("just added").container = Some(anchor);
                    }
                    hypothesis_prior(graph, id, pose, &config);
                    let s = config.relation_sigma;
                    graph.add_edge(Edge {
                        from: anchor,
                        to: id,
                        measurement: lp.between(pose),
                        information: diag_info([s, s, 1e3]),
                        kind: EdgeKind::Relation,
                    });
                }
            }
        }
        let n = graph.len() - before;
        if n > 0 {
            eif_solve(graph, config.solve_mode)?;
        }
        added += n;
    }
    Ok(added)
}

/// Highest-weight particle's map with per-node existence probabilities.
#[derive(Debug, Clone)]
pub struct MarginalMap {
    pub graph: SemanticGraph,
    pub particle: usize,
    pub weight: f64,
    pub existence: BTreeMap<NodeId, f64>,
}

/// Nodes in different particles match when they share a MAP type and lie
/// within this distance.
const MATCH_RADIUS: f64 = 0.5;

pub fn marginal_map(set: &ParticleSet) -> MarginalMap {
    let best = set.best();
    let weights = set.weights();
    let graph = set.particles[best].graph.clone();
    let mut existence = BTreeMap::new();
    for n in graph.landmarks() {
        let t = graph.map_type(n.id);
        let mut p = 0.0;
        for (w, other) in weights.iter().zip(&set.particles) {
            let g = &other.graph;
            if g.landmarks()
                .any(|m| g.map_type(m.id) == t && m.pose.distance(n.pose) <= MATCH_RADIUS)
            {
                p += w;
            }
        }
        existence.insert(n.id, p);
    }
    MarginalMap {
        graph,
        particle: best,
        weight: weights[best],
        existence,
    }
}
