use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::graph::FactorGraph;
use super::DcgError;

/// Largest number of correspondence variables the brute-force oracle will
/// enumerate.
pub const BRUTE_FORCE_CAP: usize = 24;

/// Scores within this relative distance count as tied.
const TIE_EPS: f64 = 1e-9;

/// True candidates of one child factor node, as seen by its parent.
#[derive(Debug, Clone, Copy)]
pub struct ChildView<'a> {
    pub node: usize,
    pub values: &'a [bool],
}

/// Source of factor logits. `logit` returns `w . f` for candidate `cand` of
/// factor node `node` given the assignments of that node's children, so
/// `p(phi = true) = 1 / (1 + exp(-logit))`.
pub trait FactorScorer: Sync {
    fn logit(&self, graph: &FactorGraph, node: usize, cand: usize, children: &[ChildView<'_>]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beam {
    Width(usize),
    /// Keep every own-assignment of every node. Exact, but exponential in
    /// the candidate count of a single phrase.
    Unbounded,
}

impl Default for Beam {
    fn default() -> Self {
        Beam::Width(8)
    }
}

/// Values of every correspondence variable, indexed like the graph's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceAssignment {
    /// Parse-tree phrase id of each factor node.
    pub phrases: Vec<usize>,
    pub values: Vec<Vec<bool>>,
    /// Log-probability of the assignment under the factored model.
    pub score: f64,
}

impl CorrespondenceAssignment {
    pub fn get(&self, phrase: usize, cand: usize) -> Option<bool> {
        let i = self.phrases.iter().position(|&p| p == phrase)?;
        self.values[i].get(cand).copied()
    }

    pub fn true_count(&self) -> usize {
        self.values.iter().flatten().filter(|&&v| v).count()
    }
}

/// `ln p(true)` and `ln p(false)` of a logistic factor.
pub fn log_probs(z: f64) -> (f64, f64) {
    let ln1pexp = |x: f64| if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    (-ln1pexp(-z), -ln1pexp(z))
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn children_of<'a>(graph: &FactorGraph, node: usize, values: &'a [Vec<bool>]) -> Vec<ChildView<'a>> {
    graph.nodes[node]
        .children
        .iter()
        .map(|&c| ChildView {
            node: c,
            values: &values[c],
        })
        .collect()
}

/// Log-probability of a full assignment.
pub fn assignment_score(graph: &FactorGraph, scorer: &impl FactorScorer, values: &[Vec<bool>]) -> f64 {
    let mut total = 0.0;
    for i in 0..graph.len() {
        let children = children_of(graph, i, values);
        for (j, &v) in values[i].iter().enumerate() {
            let (lt, lf) = log_probs(scorer.logit(graph, i, j, &children));
            total += if v { lt } else { lf };
        }
    }
    total
}

/// True if no single flip improves the score.
pub fn is_locally_optimal(graph: &FactorGraph, scorer: &impl FactorScorer, a: &CorrespondenceAssignment) -> bool {
    let base = assignment_score(graph, scorer, &a.values);
    let mut values = a.values.clone();
    for i in 0..values.len() {
        for j in 0..values[i].len() {
            values[i][j] = !values[i][j];
            let s = assignment_score(graph, scorer, &values);
            values[i][j] = !values[i][j];
            if s > base + TIE_EPS * (1.0 + base.abs()) {
                return false;
            }
        }
    }
    true
}

/// Higher score first; near-ties go to the lexicographically smaller
/// assignment (false before true, earlier variables first).
fn rank(sa: f64, a: impl Iterator<Item = bool>, sb: f64, b: impl Iterator<Item = bool>) -> Ordering {
    let tol = TIE_EPS * (1.0 + sa.abs().max(sb.abs()));
    if (sa - sb).abs() > tol {
        return sb.total_cmp(&sa);
    }
    a.cmp(b)
}

#[derive(Debug, Clone)]
struct State {
    own: Vec<bool>,
    /// Max log-probability of the subtree given `own`.
    score: f64,
    /// Log of the summed probability of retained subtree assignments.
    mass: f64,
    /// Assignments of every node in the subtree, sorted by node index.
    parts: Vec<(usize, Vec<bool>)>,
}

impl State {
    fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.parts.iter().flat_map(|(_, v)| v.iter().copied())
    }

    fn rank(&self, other: &State) -> Ordering {
        rank(self.score, self.bits(), other.score, other.bits())
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Own assignments in decreasing order of score, at most `limit` of them.
/// `lt`/`lf` are the per-candidate log-probabilities.
fn best_own(lt: &[f64], lf: &[f64], limit: Option<usize>) -> Vec<Vec<bool>> {
    let k = lt.len();
    let best: Vec<bool> = (0..k).map(|j| lt[j] > lf[j]).collect();
    let Some(limit) = limit else {
        return (0..1u64 << k)
            .map(|m| (0..k).map(|j| m >> (k - 1 - j) & 1 == 1).collect())
            .collect();
    };
    // Enumerate flip sets of the independent optimum by increasing cost.
    let delta: Vec<f64> = (0..k).map(|j| (lt[j] - lf[j]).abs()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| delta[a].total_cmp(&delta[b]).then(a.cmp(&b)));

    #[derive(PartialEq)]
    struct Item(f64, Vec<usize>);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
        }
    }
    let mut out = vec![best.clone()];
    let mut heap = BinaryHeap::new();
    if k > 0 {
        heap.push(Item(delta[order[0]], vec![0]));
    }
    while out.len() < limit {
        let Some(Item(cost, set)) = heap.pop() else { break };
        let mut a = best.clone();
        for &p in &set {
            a[order[p]] = !a[order[p]];
        }
        out.push(a);
        let last = *set.last().expect("flip sets are non-empty");
        if last + 1 < k {
            let next = delta[order[last + 1]];
            let mut grow = set.clone();
            grow.push(last + 1);
            heap.push(Item(cost + next, grow));
            let mut shift = set;
            *shift.last_mut().expect("non-empty") = last + 1;
            heap.push(Item(cost - delta[order[last]] + next, shift));
        }
    }
    out
}

struct Dp {
    tables: Vec<Vec<State>>,
    marginals: Vec<Vec<f64>>,
}

fn run_dp(graph: &FactorGraph, scorer: &impl FactorScorer, beam: Beam) -> Dp {
    let n = graph.len();
    let limit = match beam {
        Beam::Width(w) => Some(w.max(1)),
        Beam::Unbounded => None,
    };
    let mut tables: Vec<Vec<State>> = vec![Vec::new(); n];
    let mut marginals = vec![Vec::new(); n];
    // Children always have larger indices, so reverse order is bottom-up.
    for i in (0..n).rev() {
        let node = &graph.nodes[i];
        let k = node.candidates.len();
        let lists: Vec<&Vec<State>> = node.children.iter().map(|&c| &tables[c]).collect();
        let mut merged: HashMap<Vec<bool>, State> = HashMap::new();
        let mut weighted: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut pick = vec![0usize; lists.len()];
        'combos: loop {
            let chosen: Vec<&State> = pick.iter().zip(&lists).map(|(&p, l)| &l[p]).collect();
            let views: Vec<ChildView<'_>> = node
                .children
                .iter()
                .zip(&chosen)
                .map(|(&c, s)| ChildView { node: c, values: &s.own })
                .collect();
            let child_score: f64 = chosen.iter().map(|s| s.score).sum();
            let child_mass: f64 = chosen.iter().map(|s| s.mass).sum();
            let mut lt = Vec::with_capacity(k);
            let mut lf = Vec::with_capacity(k);
            for j in 0..k {
                let (a, b) = log_probs(scorer.logit(graph, i, j, &views));
                lt.push(a);
                lf.push(b);
            }
            weighted.push((child_mass, lt.iter().map(|x| x.exp()).collect()));
            let mut parts: Vec<(usize, Vec<bool>)> = chosen.iter().flat_map(|s| s.parts.iter().cloned()).collect();
            parts.push((i, Vec::new()));
            parts.sort_by_key(|p| p.0);
            for own in best_own(&lt, &lf, limit) {
                let own_lp: f64 = own.iter().enumerate().map(|(j, &v)| if v { lt[j] } else { lf[j] }).sum();
                let mut parts = parts.clone();
                parts[0].1 = own.clone();
                let cand = State {
                    own: own.clone(),
                    score: child_score + own_lp,
                    mass: child_mass + own_lp,
                    parts,
                };
                match merged.get_mut(&own) {
                    Some(s) => {
                        let mass = log_add(s.mass, cand.mass);
                        if cand.rank(s) == Ordering::Less {
                            *s = cand;
                        }
                        s.mass = mass;
                    }
                    None => {
                        merged.insert(own, cand);
                    }
                }
            }
            // Advance the odometer over child state lists.
            for d in (0..pick.len()).rev() {
                pick[d] += 1;
                if pick[d] < lists[d].len() {
                    continue 'combos;
                }
                pick[d] = 0;
            }
            break;
        }
        let top = weighted.iter().map(|w| w.0).fold(f64::NEG_INFINITY, f64::max);
        let mut marg = vec![0.0; k];
        let mut total = 0.0;
        for (m, p) in &weighted {
            let w = (m - top).exp();
            total += w;
            for j in 0..k {
                marg[j] += w * p[j];
            }
        }
        marginals[i] = marg.into_iter().map(|x| x / total).collect();
        let mut states: Vec<State> = merged.into_values().collect();
        states.sort_by(|a, b| a.rank(b));
        if let Some(w) = limit {
            states.truncate(w);
        }
        tables[i] = states;
    }
    Dp { tables, marginals }
}

fn finish(graph: &FactorGraph, dp: &Dp) -> CorrespondenceAssignment {
    let mut values: Vec<Vec<bool>> = graph.nodes.iter().map(|n| vec![false; n.candidates.len()]).collect();
    let mut score = 0.0;
    // Roots are independent, so each takes its own best state.
    for &r in &graph.roots {
        let best = &dp.tables[r][0];
        score += best.score;
        for (node, v) in &best.parts {
            values[*node] = v.clone();
        }
    }
    CorrespondenceAssignment {
        phrases: graph.nodes.iter().map(|n| n.phrase).collect(),
        values,
        score,
    }
}

/// Bottom-up dynamic program over the factor graph. With
/// [`Beam::Unbounded`] the result is the exact argmax.
pub fn infer(graph: &FactorGraph, scorer: &impl FactorScorer, beam: Beam) -> CorrespondenceAssignment {
    let dp = run_dp(graph, scorer, beam);
    let a = finish(graph, &dp);
    debug_assert!(beam != Beam::Unbounded || graph.variable_count() > 16 || is_locally_optimal(graph, scorer, &a));
    a
}

/// The argmax assignment plus, per variable, `p(phi = true)` summed over
/// the child assignments retained by the same dynamic program.
pub fn infer_with_marginals(
    graph: &FactorGraph,
    scorer: &impl FactorScorer,
    beam: Beam,
) -> (CorrespondenceAssignment, Vec<Vec<f64>>) {
    let dp = run_dp(graph, scorer, beam);
    (finish(graph, &dp), dp.marginals)
}

/// Exact argmax by enumerating every assignment.
pub fn brute_force_infer(graph: &FactorGraph, scorer: &impl FactorScorer) -> Result<CorrespondenceAssignment, DcgError> {
    let v = graph.variable_count();
    if v > BRUTE_FORCE_CAP {
        return Err(DcgError::TooLarge(v));
    }
    let sizes: Vec<usize> = graph.nodes.iter().map(|n| n.candidates.len()).collect();
    let unpack = |mask: u64| -> Vec<Vec<bool>> {
        let mut bit = v;
        sizes
            .iter()
            .map(|&k| {
                (0..k)
                    .map(|_| {
                        bit -= 1;
                        mask >> bit & 1 == 1
                    })
                    .collect()
            })
            .collect()
    };
    // Masks ascend in lexicographic order, so only strict improvements win.
    let mut best = (f64::NEG_INFINITY, 0u64);
    for mask in 0..1u64 << v {
        let s = assignment_score(graph, scorer, &unpack(mask));
        let tol = TIE_EPS * (1.0 + s.abs().max(best.0.abs()));
        if best.0 == f64::NEG_INFINITY || s > best.0 + tol {
            best = (s, mask);
        }
    }
    Ok(CorrespondenceAssignment {
        phrases: graph.nodes.iter().map(|n| n.phrase).collect(),
        values: unpack(best.1),
        score: best.0,
    })
}
