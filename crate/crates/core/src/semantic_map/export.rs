use serde::Serialize;

use super::filter::ParticleSet;
use super::graph::{EdgeKind, NodeKind};
use super::pose::Pose2;

#[derive(Debug, Clone, Serialize)]
pub struct NodeSnapshot {
    pub id: u32,
    pub kind: NodeKind,
    pub hypothesized: bool,
    pub name: String,
    pub map_type: Option<String>,
    pub color: Option<String>,
    pub pose: Pose2,
    /// Marginal variances of (x, y, theta), when the metric layer is solved.
    pub covariance_diagonal: Option<[f64; 3]>,
    pub dirichlet: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeSnapshot {
    pub from: u32,
    pub to: u32,
    pub kind: EdgeKind,
    pub measurement: Pose2,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParticleSnapshot {
    pub weight: f64,
    pub nodes: Vec<NodeSnapshot>,
    pub edges: Vec<EdgeSnapshot>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSnapshot {
    pub cycle: u64,
    pub types: Vec<String>,
    pub particles: Vec<ParticleSnapshot>,
}

/// JSON-ready view of every particle's map.
pub fn snapshot(set: &ParticleSet) -> MapSnapshot {
    let types = set
        .particles
        .first()
        .map(|p| p.graph.types().to_vec())
        .unwrap_or_default();
    let particles = set
        .particles
        .iter()
        .map(|p| {
            let g = &p.graph;
            let nodes = g
                .nodes()
                .map(|n| NodeSnapshot {
                    id: n.id.0,
                    kind: n.kind,
                    hypothesized: n.hypothesized,
                    name: n.name.clone(),
                    map_type: g.map_type(n.id).map(str::to_string),
                    color: n.color.clone(),
                    pose: n.pose,
                    covariance_diagonal: g
                        .metric()
                        .and_then(|m| m.covariance(n.id))
                        .map(|c| [c[(0, 0)], c[(1, 1)], c[(2, 2)]]),
                    dirichlet: n.semantic.clone(),
                })
                .collect();
            let edges = g
                .edges()
                .iter()
                .map(|e| EdgeSnapshot {
                    from: e.from.0,
                    to: e.to.0,
                    kind: e.kind,
                    measurement: e.measurement,
                })
                .collect();
            ParticleSnapshot {
                weight: p.log_weight.exp(),
                nodes,
                edges,
            }
        })
        .collect();
    MapSnapshot {
        cycle: set.cycle,
        types,
        particles,
    }
}
