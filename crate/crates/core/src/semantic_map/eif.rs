//! Information-form solver for the metric layer.
//!
//! The graph's factors (relative pose edges, absolute priors and dense
//! marginal priors) are linearized around the current pose estimates and
//! accumulated into an information matrix `H` and gradient `b`. Solving
//! `H·δ = -b` gives one Gauss-Newton step.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Vector3};

use super::graph::{MarginalPrior, MetricLayer, NodeId, SemanticGraph};
use super::pose::{between_residual, Pose2};
use super::MapError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// One relinearization per call.
    #[default]
    SingleStep,
    /// Iterate Gauss-Newton to convergence.
    Batch,
}

const BATCH_TOL: f64 = 1e-12;
const BATCH_MAX_ITERS: usize = 100;
const PIVOT_TOL: f64 = 1e-10;

/// Linear system over the graph's nodes.
pub(crate) struct System {
    pub index: Vec<NodeId>,
    pub h: DMatrix<f64>,
    pub b: DVector<f64>,
}

fn slot_of(index: &[NodeId], id: NodeId) -> usize {
    index.binary_search(&id).expect("factor references unindexed node")
}

fn add_block(h: &mut DMatrix<f64>, i: usize, j: usize, m: &Matrix3<f64>) {
    for r in 0..3 {
        for c in 0..3 {
            h[(3 * i + r, 3 * j + c)] += m[(r, c)];
        }
    }
}

fn add_vec(b: &mut DVector<f64>, i: usize, v: &Vector3<f64>) {
    for r in 0..3 {
        b[3 * i + r] += v[r];
    }
}

/// Stacked tangent difference of the current poses from a marginal prior's
/// linearization point.
fn marginal_delta(graph: &SemanticGraph, m: &MarginalPrior) -> DVector<f64> {
    let mut dx = DVector::zeros(3 * m.nodes.len());
    for (k, (id, lin)) in m.nodes.iter().zip(&m.lin).enumerate() {
        let pose = graph.node(*id).map(|n| n.pose).unwrap_or(*lin);
        let d = pose.minus(*lin);
        dx.fixed_rows_mut::<3>(3 * k).copy_from(&d);
    }
    dx
}

/// Accumulates the linearized factors over the nodes in `index` (sorted).
/// Factors with an endpoint outside the index are skipped.
pub(crate) fn assemble(graph: &SemanticGraph, index: Vec<NodeId>) -> System {
    let n = index.len();
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    let mut b = DVector::zeros(3 * n);
    let pose = |id: NodeId| graph.node(id).map(|n| n.pose).unwrap_or_default();
    for e in graph.edges() {
        let (Ok(i), Ok(j)) = (index.binary_search(&e.from), index.binary_search(&e.to)) else {
            continue;
        };
        let (r, ja, jb) = between_residual(pose(e.from), pose(e.to), e.measurement);
        let om = &e.information;
        add_block(&mut h, i, i, &(ja.transpose() * om * ja));
        add_block(&mut h, i, j, &(ja.transpose() * om * jb));
        add_block(&mut h, j, i, &(jb.transpose() * om * ja));
        add_block(&mut h, j, j, &(jb.transpose() * om * jb));
        add_vec(&mut b, i, &(ja.transpose() * om * r));
        add_vec(&mut b, j, &(jb.transpose() * om * r));
    }
    for p in graph.priors() {
        let Ok(i) = index.binary_search(&p.node) else {
            continue;
        };
        let r = pose(p.node).minus(p.mean);
        add_block(&mut h, i, i, &p.information);
        add_vec(&mut b, i, &(p.information * r));
    }
    for m in graph.marginal_priors() {
        let slots: Vec<Option<usize>> = m.nodes.iter().map(|id| index.binary_search(id).ok()).collect();
        let dx = marginal_delta(graph, m);
        let grad = &m.gradient + &m.hessian * dx;
        for (a, sa) in slots.iter().enumerate() {
            let Some(sa) = sa else { continue };
            for r in 0..3 {
                b[3 * sa + r] += grad[3 * a + r];
            }
            for (c, sc) in slots.iter().enumerate() {
                let Some(sc) = sc else { continue };
                for r in 0..3 {
                    for k in 0..3 {
                        h[(3 * sa + r, 3 * sc + k)] += m.hessian[(3 * a + r, 3 * c + k)];
                    }
                }
            }
        }
    }
    System { index, h, b }
}

/// Cholesky with a relative pivot check; rank-deficient systems are
/// reported as singular rather than solved with garbage.
pub(crate) fn factorize(h: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>, MapError> {
    if h.nrows() == 0 {
        return Err(MapError::Singular);
    }
    let scale = h.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let chol = Cholesky::new(h.clone()).ok_or(MapError::Singular)?;
    let l = chol.l_dirty();
    for i in 0..h.nrows() {
        let d = l[(i, i)];
        if !d.is_finite() || d * d < PIVOT_TOL * scale {
            return Err(MapError::Singular);
        }
    }
    Ok(chol)
}

fn all_nodes(graph: &SemanticGraph) -> Vec<NodeId> {
    graph.nodes().map(|n| n.id).collect()
}

/// Solves the metric layer for pose means and caches the information form.
pub fn eif_solve(graph: &mut SemanticGraph, mode: SolveMode) -> Result<BTreeMap<NodeId, Pose2>, MapError> {
    let index = all_nodes(graph);
    let iters = match mode {
        SolveMode::SingleStep => 1,
        SolveMode::Batch => BATCH_MAX_ITERS,
    };
    let mut last: Option<(System, Cholesky<f64, nalgebra::Dyn>)> = None;
    for _ in 0..iters {
        let sys = assemble(graph, index.clone());
        let chol = factorize(&sys.h)?;
        let step = chol.solve(&(-&sys.b));
        for (k, id) in index.iter().enumerate() {
            let d = Vector3::new(step[3 * k], step[3 * k + 1], step[3 * k + 2]);
            let p = graph.node(*id).expect("indexed node").pose.plus(&d);
            graph.set_pose(*id, p);
        }
        let done = step.amax() < BATCH_TOL;
        last = Some((sys, chol));
        if done {
            break;
        }
    }
    let (sys, chol) = last.expect("at least one iteration");
    let mut mu = DVector::zeros(3 * index.len());
    for (k, id) in index.iter().enumerate() {
        mu.fixed_rows_mut::<3>(3 * k)
            .copy_from(&graph.node(*id).expect("indexed node").pose.to_vector());
    }
    let info_vector = &sys.h * &mu;
    graph.metric = Some(MetricLayer {
        index: sys.index,
        info_matrix: sys.h,
        info_vector,
        factor: chol,
    });
    Ok(graph.nodes().map(|n| (n.id, n.pose)).collect())
}

/// Folds every factor touching `target` into a dense marginal prior over
/// its neighbours (Schur complement) and removes the node.
pub(crate) fn marginalize(graph: &mut SemanticGraph, target: NodeId) -> Result<(), MapError> {
    let mut involved = BTreeSet::new();
    involved.insert(target);
    for e in graph.edges() {
        if e.from == target || e.to == target {
            involved.insert(e.from);
            involved.insert(e.to);
        }
    }
    for m in graph.marginal_priors() {
        if m.nodes.contains(&target) {
            involved.extend(m.nodes.iter().copied());
        }
    }
    let keep: Vec<NodeId> = involved.iter().copied().filter(|&n| n != target).collect();

    // Only factors that touch the target are folded; everything else stays.
    let mut local = SemanticGraph::new(graph.types().clone(), graph.dirichlet_prior());
    let touches_edge = |f: NodeId, t: NodeId| f == target || t == target;
    let (folded_edges, kept_edges): (Vec<_>, Vec<_>) =
        graph.edges.drain(..).partition(|e| touches_edge(e.from, e.to));
    let (folded_priors, kept_priors): (Vec<_>, Vec<_>) =
        graph.priors.drain(..).partition(|p| p.node == target);
    let (folded_marg, kept_marg): (Vec<_>, Vec<_>) =
        graph.marginals.drain(..).partition(|m| m.nodes.contains(&target));
    graph.edges = kept_edges;
    graph.priors = kept_priors;
    graph.marginals = kept_marg;

    for id in &involved {
        if let Some(n) = graph.node(*id) {
            local.insert_node_copy(n.clone());
        }
    }
    local.edges = folded_edges;
    local.priors = folded_priors;
    local.marginals = folded_marg;
    let index: Vec<NodeId> = involved.iter().copied().collect();
    let sys = assemble(&local, index.clone());
    let t = slot_of(&index, target);
    let others: Vec<usize> = (0..index.len()).filter(|&k| k != t).collect();
    let pick = |rows: &[usize]| -> Vec<usize> { rows.iter().flat_map(|&k| (0..3).map(move |r| 3 * k + r)).collect() };
    let a = pick(&[t]);
    let bi = pick(&others);
    let haa = sys.h.select_rows(&a).select_columns(&a);
    let hab = sys.h.select_rows(&a).select_columns(&bi);
    let hbb = sys.h.select_rows(&bi).select_columns(&bi);
    let ga = sys.b.select_rows(&a);
    let gb = sys.b.select_rows(&bi);
    let haa_inv = haa.try_inverse().ok_or(MapError::Singular)?;
    let hessian = &hbb - hab.transpose() * &haa_inv * &hab;
    let gradient = &gb - hab.transpose() * &haa_inv * &ga;
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let lin: Vec<Pose2> = keep
        .iter()
        .map(|id| graph.node(*id).map(|n| n.pose).unwrap_or_default())
        .collect();
    graph.remove_node_raw(target);
    if !keep.is_empty() {
        graph.marginals.push(MarginalPrior {
            nodes: keep,
            lin,
            hessian,
            gradient,
        });
    }
    Ok(())
}
