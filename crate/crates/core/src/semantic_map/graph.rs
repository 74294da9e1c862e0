use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3};
use serde::{Deserialize, Serialize};

use super::pose::Pose2;
use super::MapError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Region,
    Object,
    Robot,
}

/// A topology node with its semantic layer entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub hypothesized: bool,
    pub pose: Pose2,
    /// Dirichlet pseudo-counts over the graph's type vocabulary.
    pub semantic: Vec<f64>,
    /// Colloquial name tag.
    pub name: String,
    pub color: Option<String>,
    /// Node whose footprint contains this one ("inside").
    pub container: Option<NodeId>,
    /// Consecutive negative observations while hypothesized.
    pub misses: u32,
    /// Object types whose absence inside this node has been verified.
    pub inspected: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Odometry,
    Observation,
    Relation,
    LoopClosure,
}

/// Relative pose constraint: `measurement ≈ pose(from)⁻¹ ⊕ pose(to)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub measurement: Pose2,
    pub information: Matrix3<f64>,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Anchor,
    Hypothesis,
}

/// Absolute pose prior on a single node.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryPrior {
    pub node: NodeId,
    pub mean: Pose2,
    pub information: Matrix3<f64>,
    pub kind: PriorKind,
}

/// Dense quadratic factor left behind by marginalizing a node out of the
/// information system. Cost around the linearization point `lin` is
/// `gradientᵀ·dx + ½·dxᵀ·hessian·dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalPrior {
    pub nodes: Vec<NodeId>,
    pub lin: Vec<Pose2>,
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
}

/// Solved information form of the metric layer.
#[derive(Debug, Clone)]
pub struct MetricLayer {
    pub index: Vec<NodeId>,
    pub info_matrix: DMatrix<f64>,
    pub info_vector: DVector<f64>,
    pub(crate) factor: Cholesky<f64, Dyn>,
}

impl MetricLayer {
    pub fn slot(&self, id: NodeId) -> Option<usize> {
        self.index.binary_search(&id).ok()
    }

    /// Marginal 3x3 covariance block of one node.
    pub fn covariance(&self, id: NodeId) -> Option<Matrix3<f64>> {
        let slot = self.slot(id)?;
        let n = self.index.len() * 3;
        let mut rhs = DMatrix::zeros(n, 3);
        for k in 0..3 {
            rhs[(3 * slot + k, k)] = 1.0;
        }
        let sol = self.factor.solve(&rhs);
        Some(Matrix3::from_fn(|r, c| sol[(3 * slot + r, c)]))
    }
}

/// World model: topology, metric layer and semantic layer.
#[derive(Debug, Clone)]
pub struct SemanticGraph {
    types: Arc<[String]>,
    dirichlet_prior: f64,
    nodes: BTreeMap<NodeId, Node>,
    pub(crate) edges: Vec<Edge>,
    pub(crate) priors: Vec<UnaryPrior>,
    pub(crate) marginals: Vec<MarginalPrior>,
    next_id: u32,
    robot: Option<NodeId>,
    pub(crate) metric: Option<MetricLayer>,
}

impl SemanticGraph {
    pub fn new(types: Arc<[String]>, dirichlet_prior: f64) -> Self {
        Self {
            types,
            dirichlet_prior,
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            priors: Vec::new(),
            marginals: Vec::new(),
            next_id: 0,
            robot: None,
            metric: None,
        }
    }

    pub fn types(&self) -> &Arc<[String]> {
        &self.types
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t == name)
    }

    pub fn dirichlet_prior(&self) -> f64 {
        self.dirichlet_prior
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    /// Mutable access for semantic fields; pose changes go through
    /// [`SemanticGraph::set_pose`] so the metric cache stays coherent.
    pub(crate) fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Object and region nodes; robot poses excluded.
    pub fn landmarks(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind != NodeKind::Robot)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn priors(&self) -> &[UnaryPrior] {
        &self.priors
    }

    pub fn marginal_priors(&self) -> &[MarginalPrior] {
        &self.marginals
    }

    pub fn robot(&self) -> Option<NodeId> {
        self.robot
    }

    pub fn robot_pose(&self) -> Option<Pose2> {
        self.robot.and_then(|r| self.nodes.get(&r)).map(|n| n.pose)
    }

    pub fn metric(&self) -> Option<&MetricLayer> {
        self.metric.as_ref()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    /// Most probable type under the node's Dirichlet (ties to the lower index).
    pub fn map_type(&self, id: NodeId) -> Option<&str> {
        let node = self.nodes.get(&id)?;
        if node.kind == NodeKind::Robot {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in node.semantic.iter().enumerate() {
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        best.map(|(i, _)| self.types[i].as_str())
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Adds a robot pose node; the first one may be anchored with a prior.
    pub fn add_robot_pose(&mut self, pose: Pose2) -> NodeId {
        let id = self.fresh_id();
        self.nodes.insert(
            id,
            Node {
                id,
                kind: NodeKind::Robot,
                hypothesized: false,
                pose,
                semantic: Vec::new(),
                name: "robot".to_string(),
                color: None,
                container: None,
                misses: 0,
                inspected: BTreeSet::new(),
            },
        );
        self.robot = Some(id);
        self.metric = None;
        id
    }

    pub fn anchor(&mut self, node: NodeId, pose: Pose2, information: Matrix3<f64>) {
        self.priors.push(UnaryPrior {
            node,
            mean: pose,
            information,
            kind: PriorKind::Anchor,
        });
        self.metric = None;
    }

    /// Adds an object or region node whose semantic layer starts at the
    /// prior pseudo-count plus one observation of `type_name`.
    pub fn add_landmark(&mut self, kind: NodeKind, type_name: &str, pose: Pose2, hypothesized: bool) -> NodeId {
        let id = self.fresh_id();
        let mut semantic = vec![self.dirichlet_prior; self.types.len()];
        if let Some(i) = self.type_index(type_name) {
            semantic[i] += 1.0;
        }
        self.nodes.insert(
            id,
            Node {
                id,
                kind,
                hypothesized,
                pose,
                semantic,
                name: type_name.to_string(),
                color: None,
                container: None,
                misses: 0,
                inspected: BTreeSet::new(),
            },
        );
        self.metric = None;
        id
    }

    pub fn add_edge(&mut self, edge: Edge) {
        self.edges.push(edge);
        self.metric = None;
    }

    pub fn add_prior(&mut self, prior: UnaryPrior) {
        self.priors.push(prior);
        self.metric = None;
    }

    pub fn set_pose(&mut self, id: NodeId, pose: Pose2) {
        if let Some(n) = self.nodes.get_mut(&id) {
            n.pose = pose;
        }
        self.metric = None;
    }

    pub fn observe_type(&mut self, id: NodeId, type_name: &str) {
        if let Some(i) = self.type_index(type_name) {
            if let Some(n) = self.nodes.get_mut(&id) {
                n.semantic[i] += 1.0;
            }
        }
    }

    /// Clears the hypothesized flag and drops the placement prior. Never
    /// reverts.
    pub fn confirm(&mut self, id: NodeId) {
        if let Some(n) = self.nodes.get_mut(&id) {
            n.hypothesized = false;
            n.misses = 0;
        }
        self.priors
            .retain(|p| !(p.node == id && p.kind == PriorKind::Hypothesis));
        self.metric = None;
    }

    pub(crate) fn remove_node_raw(&mut self, id: NodeId) -> Option<Node> {
        self.edges.retain(|e| e.from != id && e.to != id);
        self.priors.retain(|p| p.node != id);
        self.metric = None;
        if self.robot == Some(id) {
            self.robot = None;
        }
        self.nodes.remove(&id)
    }

    pub(crate) fn insert_node_copy(&mut self, node: Node) {
        self.next_id = self.next_id.max(node.id.0 + 1);
        self.nodes.insert(node.id, node);
        self.metric = None;
    }

    /// Every node taking part in a marginal prior, an edge or a prior.
    pub(crate) fn constrained_nodes(&self) -> BTreeSet<NodeId> {
        let mut s = BTreeSet::new();
        for e in &self.edges {
            s.insert(e.from);
            s.insert(e.to);
        }
        for p in &self.priors {
            s.insert(p.node);
        }
        for m in &self.marginals {
            s.extend(m.nodes.iter().copied());
        }
        s
    }

    /// Checks the structural invariants of the graph.
    pub fn validate(&self) -> Result<(), MapError> {
        for e in &self.edges {
            if !self.contains(e.from) || !self.contains(e.to) {
                return Err(MapError::InvariantViolation(format!(
                    "edge {} -> {} references a missing node",
                    e.from, e.to
                )));
            }
            if (e.information - e.information.transpose()).amax() > 1e-9 {
                return Err(MapError::InvariantViolation("asymmetric edge information".into()));
            }
        }
        for p in &self.priors {
            if !self.contains(p.node) {
                return Err(MapError::InvariantViolation(format!("prior on missing node {}", p.node)));
            }
        }
        for m in &self.marginals {
            if m.nodes.iter().any(|n| !self.contains(*n)) {
                return Err(MapError::InvariantViolation("marginal prior references a missing node".into()));
            }
        }
        for n in self.landmarks() {
            if n.semantic.iter().any(|&c| c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)) {
                return Err(MapError::InvariantViolation(format!("non-positive Dirichlet count on {}", n.id)));
            }
        }
        let constrained = self.constrained_nodes();
        if let Some(n) = self.nodes.keys().find(|id| !constrained.contains(id)) {
            return Err(MapError::InvariantViolation(format!("node {n} has no constraint")));
        }
        Ok(())
    }
}
