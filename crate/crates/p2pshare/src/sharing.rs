//! Loss settlement across the network: uniform reciprocal contracts,
//! self-contribution layering, personalized engagements and a second
//! friends-of-friends layer.

use serde::Serialize;
use thiserror::Error;

use crate::lossmodel::ClaimSample;
use crate::netgen::Graph;

#[derive(Debug, Error)]
pub enum SharingError {
    #[error("node {0} is isolated; uniform contracts need degree >= 1")]
    IsolatedNode(usize),
    #[error("claims cover {claims} policyholders but the graph has {nodes}")]
    SizeMismatch { claims: usize, nodes: usize },
    #[error("engagement on non-edge ({u},{v})")]
    NonEdgeEngagement { u: usize, v: usize },
    #[error("engagement values count {values} does not match edge count {edges}")]
    LengthMismatch { values: usize, edges: usize },
    #[error("negative magnitude {value} on edge ({u},{v})")]
    NegativeMagnitude { u: usize, v: usize, value: f64 },
    #[error("self-contribution {z} outside [0, {s}]")]
    SelfContributionRange { z: f64, s: f64 },
    #[error("node {node}: layer capacity {used} exceeds budget {budget}")]
    LayerCapacity { node: usize, used: f64, budget: f64 },
    #[error("degree must be >= 1 to compute a contribution schedule")]
    ZeroDegree,
}

/// Symmetric per-edge engagement magnitudes on a graph, indexed by the
/// graph's edge order, with cached per-node coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementMap {
    magnitudes: Vec<f64>,
    coverage: Vec<f64>,
}

impl EngagementMap {
    /// Same magnitude on every edge.
    pub fn uniform(graph: &Graph, gamma: f64) -> Self {
        Self::from_edge_values(graph, vec![gamma.max(0.0); graph.edge_count()])
            .expect("uniform magnitudes are valid")
    }

    pub fn zero(graph: &Graph) -> Self {
        Self::uniform(graph, 0.0)
    }

    /// Magnitudes aligned with `graph.edges()`.
    pub fn from_edge_values(graph: &Graph, values: Vec<f64>) -> Result<Self, SharingError> {
        if values.len() != graph.edge_count() {
            return Err(SharingError::LengthMismatch {
                values: values.len(),
                edges: graph.edge_count(),
            });
        }
        for (idx, &g) in values.iter().enumerate() {
            if !(g >= 0.0) || !g.is_finite() {
                let (u, v) = graph.edges()[idx];
                return Err(SharingError::NegativeMagnitude { u, v, value: g });
            }
        }
        let mut coverage = vec![0.0; graph.node_count()];
        for (idx, &(u, v)) in graph.edges().iter().enumerate() {
            coverage[u] += values[idx];
            coverage[v] += values[idx];
        }
        Ok(EngagementMap {
            magnitudes: values,
            coverage,
        })
    }

    /// Magnitudes from `(u, v, gamma)` triples; edges not listed carry zero.
    pub fn from_entries(graph: &Graph, entries: &[(usize, usize, f64)]) -> Result<Self, SharingError> {
        let mut values = vec![0.0; graph.edge_count()];
        for &(u, v, g) in entries {
            let idx = graph
                .edge_index(u, v)
                .ok_or(SharingError::NonEdgeEngagement { u, v })?;
            values[idx] = g;
        }
        Self::from_edge_values(graph, values)
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn magnitude(&self, edge: usize) -> f64 {
        self.magnitudes[edge]
    }

    /// Per-node coverage: sum of incident magnitudes.
    pub fn coverage(&self, node: usize) -> f64 {
        self.coverage[node]
    }

    pub fn coverages(&self) -> &[f64] {
        &self.coverage
    }

    pub fn total(&self) -> f64 {
        self.magnitudes.iter().sum()
    }
}

/// Per-node funding decomposition of the settled losses.
#[derive(Debug, Clone, Serialize)]
pub struct LayerBreakdown {
    pub self_first: Vec<f64>,
    pub from_friends: Vec<f64>,
    pub paid_to_friends: Vec<f64>,
    pub from_fof: Vec<f64>,
    pub paid_to_fof: Vec<f64>,
    pub residual_self: Vec<f64>,
}

/// Post-sharing loss per node plus the layer decomposition.
///
/// Two identities hold by construction, up to float rounding:
/// `xi = self_first + residual_self + paid_to_friends + paid_to_fof` and
/// `capped loss = self_first + from_friends + from_fof + residual_self`.
#[derive(Debug, Clone, Serialize)]
pub struct SettlementResult {
    pub xi: Vec<f64>,
    pub layers: LayerBreakdown,
    /// Total capped loss entering the settlement.
    pub total_in: f64,
}

impl SettlementResult {
    pub fn total_out(&self) -> f64 {
        self.xi.iter().sum()
    }
}

/// Contribution one friend owes toward a claim of capped size `x` under a
/// uniform contract: `min(gamma, x / d)`.
pub fn uniform_contribution(x: f64, degree: usize, gamma: f64) -> Result<f64, SharingError> {
    if degree == 0 {
        return Err(SharingError::ZeroDegree);
    }
    Ok(gamma.min(x / degree as f64))
}

struct AdjacencyWithMagnitudes {
    // per node: (counterparty, magnitude)
    incident: Vec<Vec<(usize, f64)>>,
}

impl AdjacencyWithMagnitudes {
    fn build(graph: &Graph, eng: &EngagementMap) -> Self {
        let mut incident = vec![Vec::new(); graph.node_count()];
        for (idx, &(u, v)) in graph.edges().iter().enumerate() {
            let g = eng.magnitude(idx);
            incident[u].push((v, g));
            incident[v].push((u, g));
        }
        AdjacencyWithMagnitudes { incident }
    }
}

/// Layered settlement engine shared by every mechanism: self layer first,
/// then proportional contributions from friends, then friends of friends,
/// with the unshared remainder retained by the claimant.
fn settle_layers(
    graph: &Graph,
    eng1: &EngagementMap,
    second: Option<(&Graph, &EngagementMap)>,
    claims: &ClaimSample,
    self_contribution: f64,
) -> Result<SettlementResult, SharingError> {
    let n = graph.node_count();
    if claims.len() != n {
        return Err(SharingError::SizeMismatch {
            claims: claims.len(),
            nodes: n,
        });
    }
    let adj1 = AdjacencyWithMagnitudes::build(graph, eng1);
    let adj2 = second.map(|(g, e)| {
        debug_assert_eq!(g.node_count(), n);
        AdjacencyWithMagnitudes::build(g, e)
    });

    let mut layers = LayerBreakdown {
        self_first: vec![0.0; n],
        from_friends: vec![0.0; n],
        paid_to_friends: vec![0.0; n],
        from_fof: vec![0.0; n],
        paid_to_fof: vec![0.0; n],
        residual_self: vec![0.0; n],
    };

    for i in 0..n {
        let x = claims.capped[i];
        if !claims.claimed[i] || x <= 0.0 {
            continue;
        }
        let own = x.min(self_contribution);
        layers.self_first[i] = own;
        let mut remaining = x - own;

        let cover1 = eng1.coverage(i);
        if remaining > 0.0 && cover1 > 0.0 {
            let fraction = (remaining.min(cover1)) / cover1;
            let mut received = 0.0;
            for &(payer, magnitude) in &adj1.incident[i] {
                let payment = magnitude * fraction;
                layers.paid_to_friends[payer] += payment;
                received += payment;
            }
            layers.from_friends[i] = received;
            remaining = (remaining - received).max(0.0);
        }

        if let Some(adj2) = &adj2 {
            let cover2 = second.expect("second layer present").1.coverage(i);
            if remaining > 0.0 && cover2 > 0.0 {
                let fraction = (remaining.min(cover2)) / cover2;
                let mut received = 0.0;
                for &(payer, magnitude) in &adj2.incident[i] {
                    let payment = magnitude * fraction;
                    layers.paid_to_fof[payer] += payment;
                    received += payment;
                }
                layers.from_fof[i] = received;
                remaining = (remaining - received).max(0.0);
            }
        }

        layers.residual_self[i] = remaining;
    }

    let xi: Vec<f64> = (0..n)
        .map(|i| {
            layers.self_first[i]
                + layers.residual_self[i]
                + layers.paid_to_friends[i]
                + layers.paid_to_fof[i]
        })
        .collect();
    Ok(SettlementResult {
        xi,
        layers,
        total_in: claims.total_loss(),
    })
}

fn require_no_isolated(graph: &Graph) -> Result<(), SharingError> {
    for (node, &d) in graph.degrees().iter().enumerate() {
        if d == 0 {
            return Err(SharingError::IsolatedNode(node));
        }
    }
    Ok(())
}

/// Settlement under identical reciprocal contracts of magnitude `gamma`:
/// each friend of claimant `j` pays `min(gamma, x_j / d_j)`.
pub fn settle_uniform(
    graph: &Graph,
    claims: &ClaimSample,
    _deductible: f64,
    gamma: f64,
) -> Result<SettlementResult, SharingError> {
    require_no_isolated(graph)?;
    settle_layers(graph, &EngagementMap::uniform(graph, gamma), None, claims, 0.0)
}

/// Uniform contracts behind a first self-retained layer of size `z`; the
/// per-edge magnitude becomes `(s - z) / mean degree`.
pub fn settle_uniform_with_self(
    graph: &Graph,
    claims: &ClaimSample,
    deductible: f64,
    z: f64,
) -> Result<SettlementResult, SharingError> {
    if !(0.0..=deductible).contains(&z) {
        return Err(SharingError::SelfContributionRange { z, s: deductible });
    }
    require_no_isolated(graph)?;
    let gamma = (deductible - z) / graph.mean_degree();
    settle_layers(graph, &EngagementMap::uniform(graph, gamma), None, claims, z)
}

/// Settlement with per-edge magnitudes: friend `i` pays claimant `j`
/// proportionally to its engagement, capped by the engagement itself.
/// Nodes with zero coverage self-retain in full.
pub fn settle_personalized(
    graph: &Graph,
    engagement: &EngagementMap,
    claims: &ClaimSample,
    _deductible: f64,
) -> Result<SettlementResult, SharingError> {
    settle_layers(graph, engagement, None, claims, 0.0)
}

/// Two-layer settlement: self layer `z`, then friends (proportional within
/// `eng1`), then friends of friends (proportional within `eng2`).
pub fn settle_two_layer(
    graph: &Graph,
    eng1: &EngagementMap,
    fof_graph: &Graph,
    eng2: &EngagementMap,
    claims: &ClaimSample,
    deductible: f64,
    z: f64,
) -> Result<SettlementResult, SharingError> {
    if !(0.0..=deductible).contains(&z) {
        return Err(SharingError::SelfContributionRange { z, s: deductible });
    }
    let budget = deductible - z;
    for node in 0..graph.node_count() {
        let used = eng1.coverage(node) + eng2.coverage(node);
        if used > budget + 1e-9 * budget.max(1.0) {
            return Err(SharingError::LayerCapacity { node, used, budget });
        }
    }
    settle_layers(graph, eng1, Some((fof_graph, eng2)), claims, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lossmodel::{sample_claims, LossModel, Severity};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cycle4() -> Graph {
        Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    /// A=0 connected to B=1, C=2, D=3; B-C edge closes the triangle.
    fn toy_graph() -> Graph {
        Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap()
    }

    fn claims_from(losses: &[Option<f64>], s: f64) -> ClaimSample {
        ClaimSample::from_severities(losses, s).unwrap()
    }

    fn assert_xi(result: &SettlementResult, expected: &[f64]) {
        for (i, (&got, &want)) in result.xi.iter().zip(expected).enumerate() {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
            let _ = i;
        }
    }

    fn assert_conservation(result: &SettlementResult) {
        let tol = 1e-9 * result.total_in.max(1.0);
        assert!((result.total_out() - result.total_in).abs() <= tol);
    }

    #[test]
    fn uniform_contribution_examples() {
        assert_eq!(uniform_contribution(100.0, 2, 50.0).unwrap(), 50.0);
        assert_eq!(uniform_contribution(60.0, 2, 50.0).unwrap(), 30.0);
        assert_eq!(uniform_contribution(0.0, 5, 50.0).unwrap(), 0.0);
        assert!(matches!(
            uniform_contribution(10.0, 0, 50.0),
            Err(SharingError::ZeroDegree)
        ));
    }

    #[test]
    fn cycle_scenario() {
        let claims = claims_from(&[None, Some(200.0), None, Some(60.0)], 100.0);
        let result = settle_uniform(&cycle4(), &claims, 100.0, 50.0).unwrap();
        assert_xi(&result, &[80.0, 0.0, 80.0, 0.0]);
        assert_conservation(&result);
    }

    #[test]
    fn toy_scenario_b() {
        let claims = claims_from(&[None, Some(200.0), None, Some(60.0)], 100.0);
        let result = settle_uniform(&toy_graph(), &claims, 100.0, 50.0).unwrap();
        assert_xi(&result, &[100.0, 0.0, 50.0, 10.0]);
        assert_conservation(&result);
        // D keeps the unshareable remainder
        assert_abs_diff_eq!(result.layers.residual_self[3], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn toy_scenario_c() {
        let claims = claims_from(&[Some(60.0), Some(200.0), None, None], 100.0);
        let result = settle_uniform(&toy_graph(), &claims, 100.0, 50.0).unwrap();
        assert_xi(&result, &[50.0, 20.0, 70.0, 20.0]);
        assert_conservation(&result);
    }

    #[test]
    fn no_claims_no_losses() {
        let claims = claims_from(&[None, None, None, None], 100.0);
        let result = settle_uniform(&cycle4(), &claims, 100.0, 50.0).unwrap();
        assert_xi(&result, &[0.0; 4]);
    }

    #[test]
    fn gamma_limits() {
        let claims = claims_from(&[None, Some(200.0), None, Some(60.0)], 100.0);
        // gamma = 0: everyone keeps their own loss
        let result = settle_uniform(&cycle4(), &claims, 100.0, 0.0).unwrap();
        assert_xi(&result, &claims.capped);
        // huge gamma: claims fully spread over neighbors
        let result = settle_uniform(&cycle4(), &claims, 100.0, 1e9).unwrap();
        assert_xi(&result, &[80.0, 0.0, 80.0, 0.0]);
    }

    #[test]
    fn self_contribution_limits() {
        let claims = claims_from(&[Some(60.0), Some(200.0), None, None], 100.0);
        let graph = toy_graph();
        // z = s disables sharing entirely
        let result = settle_uniform_with_self(&graph, &claims, 100.0, 100.0).unwrap();
        assert_xi(&result, &claims.capped);
        // z = 0 matches the plain uniform mechanism at gamma = s / dbar
        let with_self = settle_uniform_with_self(&graph, &claims, 100.0, 0.0).unwrap();
        let plain = settle_uniform(&graph, &claims, 100.0, 50.0).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(with_self.xi[i], plain.xi[i], epsilon = 1e-12);
        }
        assert!(matches!(
            settle_uniform_with_self(&graph, &claims, 100.0, 150.0),
            Err(SharingError::SelfContributionRange { .. })
        ));
    }

    #[test]
    fn self_layer_is_paid_first() {
        // one claimant with x=90 on the 4-cycle, z=40: self 40, friends split
        // 50 two ways under gamma = (100-40)/2 = 30
        let claims = claims_from(&[Some(90.0), None, None, None], 100.0);
        let result = settle_uniform_with_self(&cycle4(), &claims, 100.0, 40.0).unwrap();
        assert_abs_diff_eq!(result.layers.self_first[0], 40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.layers.from_friends[0], 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.xi[0], 40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.xi[1], 25.0, epsilon = 1e-12);
        assert_conservation(&result);
    }

    #[test]
    fn personalized_proportional_contributions() {
        // B=1 and C=2 engage 20 and 30 toward A=0
        let graph = Graph::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let eng = EngagementMap::from_entries(&graph, &[(0, 1, 20.0), (0, 2, 30.0)]).unwrap();

        let claims = claims_from(&[Some(70.0), None, None], 100.0);
        let result = settle_personalized(&graph, &eng, &claims, 100.0).unwrap();
        assert_abs_diff_eq!(result.xi[1], 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.xi[2], 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.layers.residual_self[0], 20.0, epsilon = 1e-12);

        let claims = claims_from(&[Some(40.0), None, None], 100.0);
        let result = settle_personalized(&graph, &eng, &claims, 100.0).unwrap();
        assert_abs_diff_eq!(result.xi[1], 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.xi[2], 24.0, epsilon = 1e-12);

        let claims = claims_from(&[Some(0.0), None, None], 100.0);
        let result = settle_personalized(&graph, &eng, &claims, 100.0).unwrap();
        assert_xi(&result, &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn personalized_zero_coverage_self_retains() {
        let graph = Graph::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let eng = EngagementMap::zero(&graph);
        let claims = claims_from(&[Some(70.0), None, None], 100.0);
        let result = settle_personalized(&graph, &eng, &claims, 100.0).unwrap();
        assert_xi(&result, &[70.0, 0.0, 0.0]);
    }

    #[test]
    fn engagement_on_non_edge_is_rejected() {
        let graph = Graph::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        assert!(matches!(
            EngagementMap::from_entries(&graph, &[(1, 2, 5.0)]),
            Err(SharingError::NonEdgeEngagement { u: 1, v: 2 })
        ));
    }

    fn star5() -> Graph {
        Graph::from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap()
    }

    fn star_fof() -> Graph {
        Graph::from_edges(5, [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]).unwrap()
    }

    #[test]
    fn two_layer_hub_claim_fully_covered_by_spokes() {
        let graph = star5();
        let fof = star_fof();
        let eng1 = EngagementMap::uniform(&graph, 25.0);
        let eng2 = EngagementMap::uniform(&fof, 10.0);
        let claims = claims_from(&[Some(100.0), None, None, None, None], 100.0);
        let result = settle_two_layer(&graph, &eng1, &fof, &eng2, &claims, 200.0, 0.0).unwrap();
        assert_abs_diff_eq!(result.xi[0], 0.0, epsilon = 1e-12);
        for leaf in 1..5 {
            assert_abs_diff_eq!(result.xi[leaf], 25.0, epsilon = 1e-12);
        }
        assert_conservation(&result);
    }

    #[test]
    fn two_layer_leaf_claim_cascades() {
        let graph = star5();
        let fof = star_fof();
        let eng1 = EngagementMap::uniform(&graph, 25.0);
        let eng2 = EngagementMap::uniform(&fof, 10.0);
        let claims = claims_from(&[None, Some(100.0), None, None, None], 100.0);
        let result = settle_two_layer(&graph, &eng1, &fof, &eng2, &claims, 200.0, 0.0).unwrap();
        // hub pays 25, the three other leaves pay 10 each, 45 stays put
        assert_abs_diff_eq!(result.xi[0], 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.xi[1], 45.0, epsilon = 1e-12);
        for leaf in 2..5 {
            assert_abs_diff_eq!(result.xi[leaf], 10.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(result.layers.from_fof[1], 30.0, epsilon = 1e-12);
        assert_conservation(&result);
    }

    #[test]
    fn two_layer_with_empty_second_matches_personalized_plus_self() {
        let graph = toy_graph();
        let fof = Graph::from_edges(4, std::iter::empty()).unwrap();
        let eng1 = EngagementMap::uniform(&graph, 20.0);
        let eng2 = EngagementMap::zero(&fof);
        let claims = claims_from(&[Some(80.0), None, Some(50.0), None], 100.0);
        let layered = settle_two_layer(&graph, &eng1, &fof, &eng2, &claims, 100.0, 0.0).unwrap();
        let personalized = settle_personalized(&graph, &eng1, &claims, 100.0).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(layered.xi[i], personalized.xi[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn two_layer_capacity_violation_is_rejected() {
        let graph = star5();
        let fof = star_fof();
        let eng1 = EngagementMap::uniform(&graph, 80.0);
        let eng2 = EngagementMap::uniform(&fof, 50.0);
        let claims = claims_from(&[None, None, None, None, None], 100.0);
        assert!(matches!(
            settle_two_layer(&graph, &eng1, &fof, &eng2, &claims, 100.0, 0.0),
            Err(SharingError::LayerCapacity { .. })
        ));
    }

    #[test]
    fn isolated_node_is_rejected() {
        let graph = Graph::from_edges(3, [(0, 1)]).unwrap();
        let claims = claims_from(&[None, None, None], 100.0);
        assert!(matches!(
            settle_uniform(&graph, &claims, 100.0, 50.0),
            Err(SharingError::IsolatedNode(2))
        ));
    }

    #[test]
    fn regular_graph_fairness_identity() {
        // 2-regular ring, deterministic losses equal to s, gamma = s / dbar:
        // each settled loss is gamma times the number of claiming neighbors
        let n = 6;
        let ring = Graph::from_edges(n, (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n))))
            .unwrap();
        let s = 100.0;
        let gamma = s / 2.0;
        let pattern = [true, false, true, true, false, false];
        let losses: Vec<Option<f64>> = pattern
            .iter()
            .map(|&z| if z { Some(s) } else { None })
            .collect();
        let claims = claims_from(&losses, s);
        let result = settle_uniform(&ring, &claims, s, gamma).unwrap();
        for i in 0..n {
            let claiming_neighbors = ring
                .neighbors(i)
                .iter()
                .filter(|&&j| pattern[j])
                .count() as f64;
            assert_abs_diff_eq!(result.xi[i], claiming_neighbors * gamma, epsilon = 1e-9);
        }
    }

    #[test]
    fn random_settlements_conserve_and_never_enrich() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let graph = crate::netgen::generate_graph(
            &crate::netgen::DegreeSpec::new(8.0, 3.0),
            50,
            &mut rng,
            crate::netgen::GenerateOptions::default(),
        )
        .unwrap();
        let model = LossModel::new(
            0.2,
            Severity::Uniform { lo: 0.0, hi: 250.0 },
            100.0,
        )
        .unwrap();
        for _ in 0..50 {
            let claims = sample_claims(&model, 50, &mut rng).unwrap();
            let result = settle_uniform_with_self(&graph, &claims, 100.0, 20.0).unwrap();
            assert_conservation(&result);
            for i in 0..50 {
                let received = result.layers.from_friends[i] + result.layers.from_fof[i];
                assert!(received <= claims.capped[i] + 1e-9);
                assert!(result.xi[i] >= 0.0);
            }
        }
    }
}
