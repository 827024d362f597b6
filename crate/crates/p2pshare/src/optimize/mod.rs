//! Engagement optimization: the coverage-maximizing LP, its sparse
//! mixed-integer variant, the minimum-variance quadratic program and the
//! two-stage friends-of-friends LP.

pub mod maxflow;
pub mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgen::{friends_of_friends, Graph, NetgenError};
use crate::sharing::{EngagementMap, SharingError};
use maxflow::FlowNetwork;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("cap {0} must be a nonnegative finite number")]
    BadCap(f64),
    #[error("per-node capacities count {got} does not match node count {expected}")]
    CapCountMismatch { got: usize, expected: usize },
    #[error("node {0} is out of range")]
    NodeOutOfRange(usize),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error(transparent)]
    Netgen(#[from] NetgenError),
    #[error("engagement file rejected: {0}")]
    BadFile(String),
}

/// Per-node capacity for the engagement LP: the deductible, or stage-2
/// residuals.
#[derive(Debug, Clone)]
pub enum NodeCaps {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl NodeCaps {
    fn get(&self, node: usize) -> f64 {
        match self {
            NodeCaps::Uniform(s) => *s,
            NodeCaps::PerNode(v) => v[node],
        }
    }

    fn validate(&self, n: usize) -> Result<(), OptimizeError> {
        match self {
            NodeCaps::Uniform(s) => {
                if !(*s >= 0.0) || !s.is_finite() {
                    return Err(OptimizeError::BadCap(*s));
                }
            }
            NodeCaps::PerNode(v) => {
                if v.len() != n {
                    return Err(OptimizeError::CapCountMismatch {
                        got: v.len(),
                        expected: n,
                    });
                }
                for &c in v {
                    if !(c >= 0.0) || !c.is_finite() {
                        return Err(OptimizeError::BadCap(c));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Coverage-maximization instance: per-edge upper bound and per-node
/// capacity.
#[derive(Debug)]
pub struct LpProblem<'g> {
    pub graph: &'g Graph,
    pub edge_cap: f64,
    pub node_caps: NodeCaps,
}

impl<'g> LpProblem<'g> {
    pub fn new(graph: &'g Graph, deductible: f64, edge_cap: f64) -> Self {
        LpProblem {
            graph,
            edge_cap,
            node_caps: NodeCaps::Uniform(deductible),
        }
    }

    fn validate(&self) -> Result<(), OptimizeError> {
        if !(self.edge_cap >= 0.0) || !self.edge_cap.is_finite() {
            return Err(OptimizeError::BadCap(self.edge_cap));
        }
        self.node_caps.validate(self.graph.node_count())
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub engagement: EngagementMap,
    pub objective: f64,
}

/// Raw per-edge magnitudes maximizing total coverage, via max flow on the
/// bipartite double cover (each edge becomes two opposite arcs; halving the
/// flow recovers the symmetric edge value).
fn lp_edge_values(problem: &LpProblem, allowed: Option<&[bool]>) -> Vec<f64> {
    let graph = problem.graph;
    let n = graph.node_count();
    let m = graph.edge_count();
    let source = 0;
    let left = |i: usize| 1 + i;
    let right = |i: usize| 1 + n + i;
    let sink = 1 + 2 * n;
    let mut net = FlowNetwork::new(2 + 2 * n);
    for i in 0..n {
        let cap = problem.node_caps.get(i);
        net.add_arc(source, left(i), cap);
        net.add_arc(right(i), sink, cap);
    }
    let mut handles = Vec::with_capacity(m);
    for (idx, &(u, v)) in graph.edges().iter().enumerate() {
        let cap = if allowed.is_none_or(|mask| mask[idx]) {
            problem.edge_cap
        } else {
            0.0
        };
        let h1 = net.add_arc(left(u), right(v), cap);
        let h2 = net.add_arc(left(v), right(u), cap);
        handles.push((h1, h2));
    }
    net.max_flow(source, sink);
    handles
        .iter()
        .map(|&(h1, h2)| 0.5 * (net.flow(h1) + net.flow(h2)))
        .collect()
}

/// Minimizes the sum of squared magnitudes over the optimal face, keeping
/// the objective fixed: projected gradient with cyclic Dykstra projections
/// onto the box, the node capacity halfspaces and the optimal-value
/// hyperplane. Returns `None` if the balanced point drifts out of tolerance,
/// in which case the caller keeps the vertex solution.
fn balance_over_optimal_face(
    problem: &LpProblem,
    allowed: Option<&[bool]>,
    start: &[f64],
    target: f64,
) -> Option<Vec<f64>> {
    let graph = problem.graph;
    let n = graph.node_count();
    let m = start.len();
    if m == 0 || target <= 0.0 {
        return None;
    }
    let scale = problem.edge_cap.max(1.0);
    let caps: Vec<f64> = (0..m)
        .map(|e| {
            if allowed.is_none_or(|mask| mask[e]) {
                problem.edge_cap
            } else {
                0.0
            }
        })
        .collect();
    let node_edges = {
        let mut incident = vec![Vec::new(); n];
        for (idx, &(u, v)) in graph.edges().iter().enumerate() {
            incident[u].push(idx);
            incident[v].push(idx);
        }
        incident
    };
    let node_caps: Vec<f64> = (0..n).map(|i| problem.node_caps.get(i)).collect();

    // Dykstra corrections, warm-started across projected-gradient steps;
    // per-node corrections are stored compactly on the incident edges only
    struct Corrections {
        box_: Vec<f64>,
        nodes: Vec<Vec<f64>>,
        sum: Vec<f64>,
    }
    let mut corrections = Corrections {
        box_: vec![0.0; m],
        nodes: node_edges.iter().map(|inc| vec![0.0; inc.len()]).collect(),
        sum: vec![0.0; m],
    };
    let mut x = start.to_vec();

    let project = |x: &mut Vec<f64>, corrections: &mut Corrections, sweeps: usize| {
        let tol = 1e-11 * scale;
        for _ in 0..sweeps {
            let mut moved: f64 = 0.0;
            // box
            for e in 0..m {
                let y = x[e] + corrections.box_[e];
                let proj = y.clamp(0.0, caps[e]);
                corrections.box_[e] = y - proj;
                moved = moved.max((proj - x[e]).abs());
                x[e] = proj;
            }
            // node capacity halfspaces
            for i in 0..n {
                let plane = &mut corrections.nodes[i];
                let mut sum = 0.0;
                for (slot, &e) in plane.iter().zip(&node_edges[i]) {
                    sum += x[e] + slot;
                }
                let excess = sum - node_caps[i];
                if excess > 0.0 {
                    let shift = excess / node_edges[i].len() as f64;
                    for (slot, &e) in plane.iter_mut().zip(&node_edges[i]) {
                        let y = x[e] + *slot;
                        let proj = y - shift;
                        *slot = shift;
                        moved = moved.max((proj - x[e]).abs());
                        x[e] = proj;
                    }
                } else {
                    for (slot, &e) in plane.iter_mut().zip(&node_edges[i]) {
                        x[e] += *slot;
                        moved = moved.max(slot.abs());
                        *slot = 0.0;
                    }
                }
            }
            // total-coverage hyperplane
            {
                let mut sum = 0.0;
                for e in 0..m {
                    x[e] += corrections.sum[e];
                    sum += x[e];
                }
                let shift = (sum - target) / m as f64;
                for (xe, pe) in x.iter_mut().zip(corrections.sum.iter_mut()) {
                    *xe -= shift;
                    *pe = shift;
                }
                moved = moved.max(shift.abs());
            }
            if moved < tol {
                break;
            }
        }
    };

    let step = 0.25; // gradient of sum of squares contracts x by half
    let mut previous = f64::INFINITY;
    for iteration in 0..80 {
        for value in x.iter_mut() {
            *value *= 1.0 - 2.0 * step;
        }
        project(&mut x, &mut corrections, 40);
        let objective: f64 = x.iter().map(|v| v * v).sum();
        if iteration % 10 == 9 {
            if previous - objective < 1e-12 * objective.max(1.0) {
                break;
            }
            previous = objective;
        }
    }
    // final feasibility tightening
    project(&mut x, &mut corrections, 200);
    for value in x.iter_mut() {
        *value = value.clamp(0.0, problem.edge_cap);
    }

    let total: f64 = x.iter().sum();
    if (total - target).abs() > 1e-7 * target.max(1.0) {
        return None;
    }
    for i in 0..n {
        let sum: f64 = node_edges[i].iter().map(|&e| x[e]).sum();
        if sum > node_caps[i] + 1e-9 * scale {
            return None;
        }
    }
    Some(x)
}

fn solve_lp_inner(
    problem: &LpProblem,
    allowed: Option<&[bool]>,
    balance: bool,
) -> Result<LpSolution, OptimizeError> {
    problem.validate()?;
    let vertex = lp_edge_values(problem, allowed);
    let objective: f64 = vertex.iter().sum();
    let values = if balance {
        balance_over_optimal_face(problem, allowed, &vertex, objective).unwrap_or(vertex)
    } else {
        vertex
    };
    let engagement = EngagementMap::from_edge_values(problem.graph, values)?;
    debug_assert!(feasible(problem, &engagement));
    Ok(LpSolution {
        engagement,
        objective,
    })
}

fn feasible(problem: &LpProblem, eng: &EngagementMap) -> bool {
    let slack = 1e-9 * problem.edge_cap.max(1.0);
    eng.magnitudes()
        .iter()
        .all(|&g| g >= -slack && g <= problem.edge_cap + slack)
        && (0..problem.graph.node_count())
            .all(|i| eng.coverage(i) <= problem.node_caps.get(i) + slack)
}

/// Maximizes total engagement subject to the per-edge bound and per-node
/// capacities. Among the optima, returns the balanced solution minimizing
/// the sum of squared magnitudes.
pub fn solve_engagement_lp(problem: &LpProblem) -> Result<LpSolution, OptimizeError> {
    solve_lp_inner(problem, None, true)
}

/// Sum of magnitudes incident to a node.
pub fn node_coverage(engagement: &EngagementMap, node: usize) -> Result<f64, OptimizeError> {
    if node >= engagement.coverages().len() {
        return Err(OptimizeError::NodeOutOfRange(node));
    }
    Ok(engagement.coverage(node))
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub engagement: EngagementMap,
    pub objective: f64,
    /// Whether the support is provably optimal (branch and bound) rather
    /// than the greedy pruning heuristic.
    pub exact: bool,
}

const MIP_EXACT_EDGE_LIMIT: usize = 24;
const SUPPORT_EPS: f64 = 1e-9;

/// Coverage maximization with at most `max_edges` carrying nonzero
/// magnitude. Exact branch and bound up to 24 edges, greedy
/// prune-smallest-then-resolve above.
pub fn solve_sparse_mip(problem: &LpProblem, max_edges: usize) -> Result<MipSolution, OptimizeError> {
    problem.validate()?;
    let m = problem.graph.edge_count();
    if max_edges >= m {
        let solution = solve_lp_inner(problem, None, true)?;
        return Ok(MipSolution {
            engagement: solution.engagement,
            objective: solution.objective,
            exact: true,
        });
    }
    if m <= MIP_EXACT_EDGE_LIMIT {
        solve_mip_exact(problem, max_edges)
    } else {
        solve_mip_greedy(problem, max_edges)
    }
}

fn support_of(values: &[f64], eps: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > eps)
        .map(|(e, _)| e)
        .collect()
}

fn solve_mip_exact(problem: &LpProblem, max_edges: usize) -> Result<MipSolution, OptimizeError> {
    let m = problem.graph.edge_count();
    let eps = SUPPORT_EPS * problem.edge_cap.max(1.0);
    let mut best_value = -1.0;
    let mut best_mask: Vec<bool> = vec![false; m];

    // depth-first over (forced-in, excluded) edge sets with the LP bound
    fn recurse(
        problem: &LpProblem,
        max_edges: usize,
        eps: f64,
        forced_in: &mut Vec<usize>,
        excluded: &mut Vec<bool>,
        best_value: &mut f64,
        best_mask: &mut Vec<bool>,
    ) {
        let m = excluded.len();
        let allowed: Vec<bool> = excluded.iter().map(|&out| !out).collect();
        let values = lp_edge_values(problem, Some(&allowed));
        let lp_objective: f64 = values.iter().sum();
        let bound = lp_objective.min(max_edges as f64 * problem.edge_cap);
        if bound <= *best_value + 1e-12 * problem.edge_cap.max(1.0) {
            return;
        }
        let support = support_of(&values, eps);
        if support.len() <= max_edges {
            if lp_objective > *best_value {
                *best_value = lp_objective;
                best_mask.fill(false);
                for &e in &support {
                    best_mask[e] = true;
                }
            }
            return;
        }
        if forced_in.len() == max_edges {
            let restricted: Vec<bool> = (0..m).map(|e| forced_in.contains(&e)).collect();
            let values = lp_edge_values(problem, Some(&restricted));
            let objective: f64 = values.iter().sum();
            if objective > *best_value {
                *best_value = objective;
                best_mask.copy_from_slice(&restricted);
            }
            return;
        }
        // branch on the free edge carrying the most value
        let branch = support
            .iter()
            .copied()
            .filter(|e| !forced_in.contains(e))
            .max_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("support larger than forced-in set");
        forced_in.push(branch);
        recurse(problem, max_edges, eps, forced_in, excluded, best_value, best_mask);
        forced_in.pop();
        excluded[branch] = true;
        recurse(problem, max_edges, eps, forced_in, excluded, best_value, best_mask);
        excluded[branch] = false;
    }

    let mut forced_in = Vec::new();
    let mut excluded = vec![false; m];
    recurse(
        problem,
        max_edges,
        eps,
        &mut forced_in,
        &mut excluded,
        &mut best_value,
        &mut best_mask,
    );

    let solution = solve_lp_inner(problem, Some(&best_mask), true)?;
    Ok(MipSolution {
        objective: solution.objective,
        engagement: solution.engagement,
        exact: true,
    })
}

fn solve_mip_greedy(problem: &LpProblem, max_edges: usize) -> Result<MipSolution, OptimizeError> {
    let m = problem.graph.edge_count();
    let eps = SUPPORT_EPS * problem.edge_cap.max(1.0);
    let mut allowed = vec![true; m];
    let mut pruned = false;
    loop {
        let values = lp_edge_values(problem, Some(&allowed));
        let support = support_of(&values, eps);
        if support.len() <= max_edges {
            let mut mask = vec![false; m];
            for &e in &support {
                mask[e] = true;
            }
            let solution = solve_lp_inner(problem, Some(&mask), true)?;
            return Ok(MipSolution {
                objective: solution.objective,
                engagement: solution.engagement,
                exact: !pruned,
            });
        }
        let smallest = support
            .iter()
            .copied()
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("support nonempty");
        allowed[smallest] = false;
        pruned = true;
    }
}

/// Symmetric linear-sharing weights from the minimum-variance program:
/// one self-share per node plus one share per edge, each node's total
/// summing to one.
#[derive(Debug, Clone)]
pub struct QpShares {
    pub self_shares: Vec<f64>,
    pub edge_shares: Vec<f64>,
    /// `sum w_ii^2 + 2 sum w_ij^2`, the normalized total variance.
    pub objective: f64,
}

/// Minimizes the total variance of the shared losses over symmetric weights
/// with per-node totals of one, nonnegativity, the engagement cap
/// `w_ij * s <= gamma` on edges and `w_ii <= 1` on self-shares.
///
/// Projected gradient with cyclic Dykstra projections onto each node's
/// box-bounded simplex; stops when the objective improves by less than
/// 1e-10 over 100 iterations.
pub fn solve_min_variance_qp(
    graph: &Graph,
    deductible: f64,
    gamma: f64,
) -> Result<QpShares, OptimizeError> {
    if !(deductible > 0.0) || !deductible.is_finite() {
        return Err(OptimizeError::BadCap(deductible));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(OptimizeError::BadCap(gamma));
    }
    let n = graph.node_count();
    let m = graph.edge_count();
    let edge_ub = gamma / deductible;

    // variable layout: self shares then edge shares
    let var_count = n + m;
    let hi: Vec<f64> = (0..var_count)
        .map(|k| if k < n { 1.0 } else { edge_ub })
        .collect();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        groups[i].push(i);
    }
    for (idx, &(u, v)) in graph.edges().iter().enumerate() {
        groups[u].push(n + idx);
        groups[v].push(n + idx);
    }

    let mut x = vec![0.0; var_count];
    for value in x.iter_mut().take(n) {
        *value = 1.0;
    }
    let mut corrections: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len()]).collect();

    let project = |x: &mut Vec<f64>, corrections: &mut Vec<Vec<f64>>, sweeps: usize| {
        for _ in 0..sweeps {
            let mut moved: f64 = 0.0;
            for (group, correction) in groups.iter().zip(corrections.iter_mut()) {
                let mut values: Vec<f64> = group
                    .iter()
                    .zip(correction.iter())
                    .map(|(&k, &p)| x[k] + p)
                    .collect();
                project_box_simplex(&mut values, group, &hi);
                for ((slot, &k), &projected) in
                    correction.iter_mut().zip(group.iter()).zip(values.iter())
                {
                    *slot = x[k] + *slot - projected;
                    moved = moved.max((x[k] - projected).abs());
                    x[k] = projected;
                }
            }
            if moved < 1e-11 {
                break;
            }
        }
    };

    let step = 0.2;
    let self_scale = 1.0 - 2.0 * step;
    let edge_scale = 1.0 - 4.0 * step;
    let objective = |x: &[f64]| -> f64 {
        x[..n].iter().map(|v| v * v).sum::<f64>()
            + 2.0 * x[n..].iter().map(|v| v * v).sum::<f64>()
    };
    let mut checkpoint = f64::INFINITY;
    for iteration in 0..5000 {
        for (k, value) in x.iter_mut().enumerate() {
            *value *= if k < n { self_scale } else { edge_scale };
        }
        project(&mut x, &mut corrections, 60);
        if iteration % 100 == 99 {
            let current = objective(&x);
            if checkpoint - current < 1e-10 {
                break;
            }
            checkpoint = current;
        }
    }
    project(&mut x, &mut corrections, 400);

    Ok(QpShares {
        objective: objective(&x),
        self_shares: x[..n].to_vec(),
        edge_shares: x[n..].to_vec(),
    })
}

/// Projects `values` onto `{v : sum v = 1, 0 <= v_k <= hi_k}` by bisection
/// on the shared shift.
fn project_box_simplex(values: &mut [f64], keys: &[usize], hi: &[f64]) {
    let sum_at = |tau: f64| -> f64 {
        values
            .iter()
            .zip(keys)
            .map(|(&v, &k)| (v - tau).clamp(0.0, hi[k]))
            .sum()
    };
    let mut lo = values
        .iter()
        .zip(keys)
        .map(|(&v, &k)| v - hi[k])
        .fold(f64::INFINITY, f64::min);
    let mut up = values.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
    // f(lo) = sum of caps >= 1 (self cap is 1), f(up) = 0
    for _ in 0..100 {
        let mid = 0.5 * (lo + up);
        if sum_at(mid) >= 1.0 {
            lo = mid;
        } else {
            up = mid;
        }
    }
    let tau = 0.5 * (lo + up);
    for (value, &k) in values.iter_mut().zip(keys) {
        *value = (*value - tau).clamp(0.0, hi[k]);
    }
}

/// Output of the two-stage friends-of-friends optimization.
#[derive(Debug, Clone)]
pub struct TwoStageSolution {
    pub first: LpSolution,
    /// Nodes left under-covered by stage one.
    pub eligible: Vec<usize>,
    pub fof_graph: Graph,
    pub second: LpSolution,
}

/// Stage one maximizes coverage among friends under `gamma1`; nodes whose
/// coverage stays below the capacity then optimize a second layer over the
/// friends-of-friends network under `gamma2` and their residual capacity.
pub fn solve_two_stage(
    graph: &Graph,
    capacity: f64,
    gamma1: f64,
    gamma2: f64,
) -> Result<TwoStageSolution, OptimizeError> {
    let first = solve_engagement_lp(&LpProblem::new(graph, capacity, gamma1))?;
    let slack = 1e-6 * capacity.max(1.0);
    let eligible: Vec<usize> = (0..graph.node_count())
        .filter(|&i| first.engagement.coverage(i) < capacity - slack)
        .collect();
    let fof_graph = friends_of_friends(graph, &eligible)?;
    let residuals: Vec<f64> = (0..graph.node_count())
        .map(|i| (capacity - first.engagement.coverage(i)).max(0.0))
        .collect();
    let second = solve_engagement_lp(&LpProblem {
        graph: &fof_graph,
        edge_cap: gamma2,
        node_caps: NodeCaps::PerNode(residuals),
    })?;
    // the solver returns values on fof_graph's edge order; re-anchor them to
    // an engagement over that same graph for settlement use
    Ok(TwoStageSolution {
        first,
        eligible,
        fof_graph,
        second,
    })
}

/// On-disk form of an engagement map: nonzero `[u, v, gamma]` triples plus
/// solver metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngagementFile {
    pub objective: f64,
    pub exact: bool,
    pub stage: u32,
    pub edges: Vec<(usize, usize, f64)>,
}

impl EngagementFile {
    pub fn from_engagement(graph: &Graph, eng: &EngagementMap, objective: f64, exact: bool, stage: u32) -> Self {
        let edges = graph
            .edges()
            .iter()
            .zip(eng.magnitudes())
            .filter(|&(_, &g)| g > 0.0)
            .map(|(&(u, v), &g)| (u, v, g))
            .collect();
        EngagementFile {
            objective,
            exact,
            stage,
            edges,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("engagement serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, OptimizeError> {
        serde_json::from_str(text).map_err(|e| OptimizeError::BadFile(e.to_string()))
    }

    pub fn to_engagement(&self, graph: &Graph) -> Result<EngagementMap, OptimizeError> {
        Ok(EngagementMap::from_entries(graph, &self.edges)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn toy_graph() -> Graph {
        Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (0, 2), (1, 2)]).unwrap()
    }

    #[test]
    fn lp_toy_graph_objective() {
        let graph = toy_graph();
        let solution = solve_engagement_lp(&LpProblem::new(&graph, 100.0, 50.0)).unwrap();
        assert_abs_diff_eq!(solution.objective, 150.0, epsilon = 1e-7);
        // balanced optimum: full cap on the only edge off node 0, node 0's
        // budget split evenly across its three edges
        let eng = &solution.engagement;
        let bc = graph.edge_index(1, 2).unwrap();
        assert_abs_diff_eq!(eng.magnitude(bc), 50.0, epsilon = 1e-4);
        for (u, v) in [(0, 1), (0, 2), (0, 3)] {
            let e = graph.edge_index(u, v).unwrap();
            assert_abs_diff_eq!(eng.magnitude(e), 100.0 / 3.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn lp_triangle_saturates_all_edges() {
        let graph = triangle();
        let solution = solve_engagement_lp(&LpProblem::new(&graph, 100.0, 50.0)).unwrap();
        assert_abs_diff_eq!(solution.objective, 150.0, epsilon = 1e-7);
        for e in 0..3 {
            assert_abs_diff_eq!(solution.engagement.magnitude(e), 50.0, epsilon = 1e-6);
        }
        for i in 0..3 {
            assert_abs_diff_eq!(node_coverage(&solution.engagement, i).unwrap(), 100.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn lp_single_edge() {
        let graph = Graph::from_edges(2, [(0, 1)]).unwrap();
        let solution = solve_engagement_lp(&LpProblem::new(&graph, 100.0, 50.0)).unwrap();
        assert_abs_diff_eq!(solution.objective, 50.0, epsilon = 1e-9);
    }

    #[test]
    fn lp_no_edges() {
        let graph = Graph::from_edges(3, std::iter::empty()).unwrap();
        let solution = solve_engagement_lp(&LpProblem::new(&graph, 100.0, 50.0)).unwrap();
        assert_eq!(solution.objective, 0.0);
    }

    #[test]
    fn lp_regular_graph_reaches_full_coverage() {
        let n = 10;
        let ring: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| {
                [
                    (i.min((i + 1) % n), i.max((i + 1) % n)),
                    (i.min((i + 2) % n), i.max((i + 2) % n)),
                ]
            })
            .collect();
        let graph = Graph::from_edges(n, ring).unwrap();
        assert!(graph.degrees().iter().all(|&d| d == 4));
        let s = 100.0;
        let solution =
            solve_engagement_lp(&LpProblem::new(&graph, s, s / 4.0)).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(solution.engagement.coverage(i), s, epsilon = 1e-6);
        }
    }

    fn random_small_graph(rng: &mut StdRng) -> Graph {
        loop {
            let n = rng.random_range(3..=7);
            let mut all_pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
                .collect();
            for i in (1..all_pairs.len()).rev() {
                all_pairs.swap(i, rng.random_range(0..=i));
            }
            let m = rng.random_range(1..=6.min(all_pairs.len()));
            let graph = Graph::from_edges(n, all_pairs.into_iter().take(m)).unwrap();
            if graph.edge_count() > 0 {
                return graph;
            }
        }
    }

    #[test]
    fn lp_matches_dense_simplex() {
        let mut rng = StdRng::seed_from_u64(17);
        for trial in 0..40 {
            let graph = random_small_graph(&mut rng);
            let s = [100.0, 100.0, 4.0][trial % 3];
            let cap = [50.0, 30.0, 1.0][trial % 3];
            let problem = LpProblem::new(&graph, s, cap);
            let ours = solve_engagement_lp(&problem).unwrap();

            let m = graph.edge_count();
            let n = graph.node_count();
            let c = vec![1.0; m];
            let mut rows = Vec::new();
            let mut rhs = Vec::new();
            for i in 0..n {
                let mut row = vec![0.0; m];
                for (e, &(u, v)) in graph.edges().iter().enumerate() {
                    if u == i || v == i {
                        row[e] = 1.0;
                    }
                }
                rows.push(row);
                rhs.push(s);
            }
            for e in 0..m {
                let mut row = vec![0.0; m];
                row[e] = 1.0;
                rows.push(row);
                rhs.push(cap);
            }
            let (_, reference) = simplex::maximize(&c, &rows, &rhs).unwrap();
            assert_abs_diff_eq!(ours.objective, reference, epsilon = 1e-7);
        }
    }

    #[test]
    fn mip_unconstrained_equals_lp() {
        let graph = toy_graph();
        let problem = LpProblem::new(&graph, 100.0, 50.0);
        let lp = solve_engagement_lp(&problem).unwrap();
        let mip = solve_sparse_mip(&problem, 10).unwrap();
        assert!(mip.exact);
        assert_abs_diff_eq!(mip.objective, lp.objective, epsilon = 1e-9);
    }

    #[test]
    fn mip_path_single_edge() {
        let graph = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let mip = solve_sparse_mip(&LpProblem::new(&graph, 100.0, 50.0), 1).unwrap();
        assert!(mip.exact);
        assert_abs_diff_eq!(mip.objective, 50.0, epsilon = 1e-9);
    }

    #[test]
    fn mip_toy_graph_two_edges() {
        let graph = toy_graph();
        let mip = solve_sparse_mip(&LpProblem::new(&graph, 100.0, 50.0), 2).unwrap();
        assert!(mip.exact);
        assert_abs_diff_eq!(mip.objective, 100.0, epsilon = 1e-9);
        let nonzero = mip
            .engagement
            .magnitudes()
            .iter()
            .filter(|&&g| g > 1e-9)
            .count();
        assert!(nonzero <= 2);
    }

    #[test]
    fn mip_zero_edges_allowed() {
        let graph = toy_graph();
        let mip = solve_sparse_mip(&LpProblem::new(&graph, 100.0, 50.0), 0).unwrap();
        assert!(mip.exact);
        assert_eq!(mip.objective, 0.0);
    }

    #[test]
    fn mip_exact_matches_support_enumeration() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..10 {
            let graph = random_small_graph(&mut rng);
            let problem = LpProblem::new(&graph, 100.0, 50.0);
            let m = graph.edge_count();
            for limit in 1..=m.min(3) {
                let mip = solve_sparse_mip(&problem, limit).unwrap();
                assert!(mip.exact);
                let mut best = 0.0f64;
                for subset in 0u32..(1 << m) {
                    if (subset.count_ones() as usize) > limit {
                        continue;
                    }
                    let mask: Vec<bool> = (0..m).map(|e| subset & (1 << e) != 0).collect();
                    let objective: f64 = lp_edge_values(&problem, Some(&mask)).iter().sum();
                    best = best.max(objective);
                }
                assert_abs_diff_eq!(mip.objective, best, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn qp_complete_graph_equal_shares() {
        let graph = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let shares = solve_min_variance_qp(&graph, 100.0, 50.0).unwrap();
        assert_abs_diff_eq!(shares.objective, 1.0, epsilon = 1e-6);
        for &w in shares.self_shares.iter().chain(&shares.edge_shares) {
            assert_abs_diff_eq!(w, 0.25, epsilon = 1e-5);
        }
    }

    #[test]
    fn qp_cycle_closed_form() {
        let graph = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let shares = solve_min_variance_qp(&graph, 100.0, 50.0).unwrap();
        assert_abs_diff_eq!(shares.objective, 4.0 / 3.0, epsilon = 1e-6);
        for &w in shares.self_shares.iter().chain(&shares.edge_shares) {
            assert_abs_diff_eq!(w, 1.0 / 3.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn qp_isolated_node_self_insures() {
        let graph = Graph::from_edges(3, [(0, 1)]).unwrap();
        let shares = solve_min_variance_qp(&graph, 100.0, 50.0).unwrap();
        assert_abs_diff_eq!(shares.self_shares[2], 1.0, epsilon = 1e-6);
        // the connected pair is capped by gamma/s = 0.5
        assert_abs_diff_eq!(shares.edge_shares[0], 0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(shares.self_shares[0], 0.5, epsilon = 1e-5);
    }

    #[test]
    fn qp_objective_never_exceeds_node_count() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..30 {
            let graph = random_small_graph(&mut rng);
            let shares = solve_min_variance_qp(&graph, 100.0, rng.random_range(5.0..80.0)).unwrap();
            assert!(shares.objective <= graph.node_count() as f64 + 1e-9);
            for i in 0..graph.node_count() {
                let total: f64 = shares.self_shares[i]
                    + graph
                        .edges()
                        .iter()
                        .enumerate()
                        .filter(|&(_, &(u, v))| u == i || v == i)
                        .map(|(e, _)| shares.edge_shares[e])
                        .sum::<f64>();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn qp_edge_deletion_never_helps() {
        let mut rng = StdRng::seed_from_u64(53);
        for _ in 0..10 {
            let graph = random_small_graph(&mut rng);
            if graph.edge_count() < 2 {
                continue;
            }
            let full = solve_min_variance_qp(&graph, 100.0, 60.0).unwrap();
            let mut edges = graph.edges().to_vec();
            edges.remove(rng.random_range(0..edges.len()));
            let reduced_graph = Graph::from_edges(graph.node_count(), edges).unwrap();
            let reduced = solve_min_variance_qp(&reduced_graph, 100.0, 60.0).unwrap();
            assert!(reduced.objective >= full.objective - 1e-6);
        }
    }

    #[test]
    fn two_stage_regular_graph_has_no_second_stage() {
        let n = 8;
        let ring: Vec<(usize, usize)> = (0..n)
            .map(|i| (i.min((i + 1) % n), i.max((i + 1) % n)))
            .collect();
        let graph = Graph::from_edges(n, ring).unwrap();
        let two = solve_two_stage(&graph, 100.0, 50.0, 10.0).unwrap();
        assert!(two.eligible.is_empty());
        assert_eq!(two.second.objective, 0.0);
    }

    #[test]
    fn two_stage_star_example() {
        let star = Graph::from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let two = solve_two_stage(&star, 100.0, 25.0, 10.0).unwrap();
        assert_abs_diff_eq!(two.first.objective, 100.0, epsilon = 1e-7);
        for leaf in 1..5 {
            assert_abs_diff_eq!(two.first.engagement.coverage(leaf), 25.0, epsilon = 1e-6);
        }
        assert_eq!(two.eligible, vec![1, 2, 3, 4]);
        assert_eq!(two.fof_graph.edge_count(), 6);
        for leaf in 1..5 {
            assert_abs_diff_eq!(two.second.engagement.coverage(leaf), 30.0, epsilon = 1e-6);
            let total = two.first.engagement.coverage(leaf) + two.second.engagement.coverage(leaf);
            assert_abs_diff_eq!(total, 55.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn two_stage_zero_second_cap() {
        let star = Graph::from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let two = solve_two_stage(&star, 100.0, 25.0, 0.0).unwrap();
        assert_eq!(two.second.objective, 0.0);
    }

    #[test]
    fn engagement_file_round_trip() {
        let graph = toy_graph();
        let solution = solve_engagement_lp(&LpProblem::new(&graph, 100.0, 50.0)).unwrap();
        let file = EngagementFile::from_engagement(&graph, &solution.engagement, solution.objective, true, 1);
        let text = file.to_json_string();
        let back = EngagementFile::from_json_str(&text).unwrap();
        let eng = back.to_engagement(&graph).unwrap();
        assert_eq!(eng, solution.engagement);
        assert_eq!(back.stage, 1);
        assert!(back.exact);
    }

    #[test]
    fn lp_feasibility_is_always_maintained() {
        let mut rng = StdRng::seed_from_u64(71);
        for _ in 0..25 {
            let graph = random_small_graph(&mut rng);
            let s = rng.random_range(10.0..200.0);
            let cap = rng.random_range(1.0..100.0);
            let problem = LpProblem::new(&graph, s, cap);
            let solution = solve_engagement_lp(&problem).unwrap();
            for &g in solution.engagement.magnitudes() {
                assert!(g >= -1e-9 && g <= cap + 1e-9);
            }
            for i in 0..graph.node_count() {
                assert!(solution.engagement.coverage(i) <= s + 1e-9 * s.max(1.0));
            }
        }
    }
}
