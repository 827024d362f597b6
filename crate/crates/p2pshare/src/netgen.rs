//! Network construction: degree-sequence sampling, simple-graph realization
//! and friends-of-friends derivation.

use std::collections::{BinaryHeap, HashSet};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Attempts to draw a degree vector with an even sum before giving up.
const PARITY_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum NetgenError {
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("mean degree {mean} must exceed the minimum degree {min}")]
    MeanBelowMin { mean: f64, min: usize },
    #[error("degree standard deviation must be a nonnegative number, got {0}")]
    BadSd(f64),
    #[error("degree sum is odd")]
    OddDegreeSum,
    #[error("could not reach an even degree sum after {0} draws")]
    ParityExhausted(usize),
    #[error("degree {degree} at node {node} exceeds n-1 = {max}")]
    DegreeOutOfRange {
        node: usize,
        degree: usize,
        max: usize,
    },
    #[error("not graphical: prefix of length {prefix} has degree sum {lhs} > bound {rhs}")]
    NotGraphical { prefix: usize, lhs: u64, rhs: u64 },
    #[error("no graphical degree sequence found after {0} attempts")]
    RetriesExhausted(usize),
    #[error("edge ({u},{v}) is invalid for a simple graph on {n} nodes")]
    BadEdge { u: usize, v: usize, n: usize },
    #[error("duplicate edge ({u},{v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("eligible node {0} is out of range")]
    EligibleOutOfRange(usize),
    #[error("graph file rejected: {0}")]
    BadFile(String),
    #[error("node {0} is out of range")]
    NodeOutOfRange(usize),
}

/// Immutable simple undirected graph with 0-indexed nodes.
///
/// Edges are stored as `(u, v)` pairs with `u < v`, sorted lexicographically,
/// alongside the adjacency lists and degree vector derived from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list, rejecting self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, NetgenError> {
        let mut norm: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(NetgenError::BadEdge { u: a, v: b, n });
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        for w in norm.windows(2) {
            if w[0] == w[1] {
                return Err(NetgenError::DuplicateEdge { u: w[0].0, v: w[0].1 });
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &norm {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let degrees = neighbors.iter().map(Vec::len).collect();
        Ok(Graph {
            n,
            edges: norm,
            neighbors,
            degrees,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge list sorted lexicographically with `u < v` per pair.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degrees[node]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        if u >= self.n || v >= self.n || u == v {
            return false;
        }
        self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Index of edge `(u, v)` in the sorted edge list.
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok()
    }

    pub fn to_json_string(&self) -> String {
        let file = GraphFile {
            n: self.n,
            edges: self.edges.clone(),
        };
        serde_json::to_string_pretty(&file).expect("graph serializes")
    }

    /// Parses the canonical JSON format and revalidates every invariant,
    /// including the sorted `u < v` edge order required of files.
    pub fn from_json_str(text: &str) -> Result<Self, NetgenError> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| NetgenError::BadFile(e.to_string()))?;
        for &(u, v) in &file.edges {
            if u >= v {
                return Err(NetgenError::BadFile(format!(
                    "edge [{u},{v}] must satisfy u < v"
                )));
            }
        }
        for w in file.edges.windows(2) {
            if w[0] >= w[1] {
                return Err(NetgenError::BadFile(format!(
                    "edges [{},{}] and [{},{}] are out of order",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Graph::from_edges(file.n, file.edges)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize)>,
}

/// Prescribed mean and dispersion for a sampled degree sequence.
///
/// Degrees are drawn as `min_degree + round(Delta)` with `Delta` Gamma
/// distributed with mean `mean_degree - min_degree` and standard deviation
/// `degree_sd`, then capped at `n - 1`.
#[derive(Debug, Clone, Copy)]
pub struct DegreeSpec {
    pub mean_degree: f64,
    pub degree_sd: f64,
    pub min_degree: usize,
}

impl DegreeSpec {
    pub fn new(mean_degree: f64, degree_sd: f64) -> Self {
        DegreeSpec {
            mean_degree,
            degree_sd,
            min_degree: 5,
        }
    }

    fn validate(&self) -> Result<(), NetgenError> {
        if !(self.degree_sd >= 0.0) || !self.degree_sd.is_finite() {
            return Err(NetgenError::BadSd(self.degree_sd));
        }
        if !(self.mean_degree > self.min_degree as f64) {
            return Err(NetgenError::MeanBelowMin {
                mean: self.mean_degree,
                min: self.min_degree,
            });
        }
        Ok(())
    }
}

/// Draws a degree vector of length `n`, redrawing the whole vector until the
/// degree sum is even.
pub fn sample_degree_sequence(
    spec: &DegreeSpec,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, NetgenError> {
    if n < 2 {
        return Err(NetgenError::TooFewNodes(n));
    }
    spec.validate()?;
    let excess_mean = spec.mean_degree - spec.min_degree as f64;
    let cap = n - 1;

    if spec.degree_sd == 0.0 {
        let degree = (spec.min_degree + excess_mean.round() as usize).min(cap);
        if (degree * n) % 2 != 0 {
            return Err(NetgenError::ParityExhausted(1));
        }
        return Ok(vec![degree; n]);
    }

    let shape = (excess_mean / spec.degree_sd).powi(2);
    let scale = spec.degree_sd.powi(2) / excess_mean;
    let gamma = Gamma::new(shape, scale).map_err(|_| NetgenError::BadSd(spec.degree_sd))?;
    for _ in 0..PARITY_ATTEMPTS {
        let degrees: Vec<usize> = (0..n)
            .map(|_| (spec.min_degree + gamma.sample(rng).round() as usize).min(cap))
            .collect();
        if degrees.iter().sum::<usize>() % 2 == 0 {
            return Ok(degrees);
        }
    }
    Err(NetgenError::ParityExhausted(PARITY_ATTEMPTS))
}

/// Erdos-Gallai test; returns the first violating prefix if the sorted
/// sequence is not graphical.
fn erdos_gallai(desc: &[usize]) -> Result<(), NetgenError> {
    let n = desc.len();
    let mut prefix: u64 = 0;
    let mut suffix: Vec<u64> = vec![0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + desc[i] as u64;
    }
    for k in 1..=n {
        prefix += desc[k - 1] as u64;
        // first index >= k whose degree is <= k
        let split = desc.partition_point(|&d| d > k).max(k);
        let rhs = (k as u64) * (k as u64 - 1)
            + (split - k) as u64 * k as u64
            + suffix[split];
        if prefix > rhs {
            return Err(NetgenError::NotGraphical {
                prefix: k,
                lhs: prefix,
                rhs,
            });
        }
    }
    Ok(())
}

/// Realizes a simple graph with exactly the given degrees via Havel-Hakimi,
/// then applies `shuffle_swaps` random degree-preserving double-edge swaps.
pub fn realize_graph(
    degrees: &[usize],
    rng: &mut impl Rng,
    shuffle_swaps: usize,
) -> Result<Graph, NetgenError> {
    let n = degrees.len();
    if n < 2 {
        return Err(NetgenError::TooFewNodes(n));
    }
    for (node, &d) in degrees.iter().enumerate() {
        if d > n - 1 {
            return Err(NetgenError::DegreeOutOfRange {
                node,
                degree: d,
                max: n - 1,
            });
        }
    }
    if degrees.iter().sum::<usize>() % 2 != 0 {
        return Err(NetgenError::OddDegreeSum);
    }
    let mut sorted: Vec<usize> = degrees.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    erdos_gallai(&sorted)?;

    // Havel-Hakimi on a max-heap keyed by (remaining degree, lowest index).
    let mut heap: BinaryHeap<(usize, std::cmp::Reverse<usize>)> = degrees
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d > 0)
        .map(|(i, &d)| (d, std::cmp::Reverse(i)))
        .collect();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(degrees.iter().sum::<usize>() / 2);
    let mut stash: Vec<(usize, usize)> = Vec::new();
    while let Some((d, std::cmp::Reverse(v))) = heap.pop() {
        if d == 0 {
            break;
        }
        stash.clear();
        for _ in 0..d {
            let (du, std::cmp::Reverse(u)) = heap
                .pop()
                .expect("graphical sequence leaves enough positive-degree partners");
            debug_assert!(du > 0);
            edges.push((v.min(u), v.max(u)));
            if du > 1 {
                stash.push((du - 1, u));
            }
        }
        for &(du, u) in &stash {
            heap.push((du, std::cmp::Reverse(u)));
        }
    }

    // Randomize within the degree class: (a,b)+(c,d) -> (a,d)+(c,b) when the
    // replacement keeps the graph simple.
    if shuffle_swaps > 0 && edges.len() >= 2 {
        let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
        let m = edges.len();
        for _ in 0..shuffle_swaps {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..m);
            if i == j {
                continue;
            }
            let (a, b) = edges[i];
            let (c, d) = edges[j];
            let (c, d) = if rng.random_bool(0.5) { (c, d) } else { (d, c) };
            if a == c || a == d || b == c || b == d {
                continue;
            }
            let e1 = (a.min(d), a.max(d));
            let e2 = (c.min(b), c.max(b));
            if present.contains(&e1) || present.contains(&e2) {
                continue;
            }
            present.remove(&edges[i]);
            present.remove(&edges[j]);
            present.insert(e1);
            present.insert(e2);
            edges[i] = e1;
            edges[j] = e2;
        }
    }

    let graph = Graph::from_edges(n, edges)?;
    debug_assert_eq!(graph.degrees(), degrees);
    Ok(graph)
}

/// Options for the sample-then-realize pipeline.
#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    /// Degree-sequence redraws allowed when realization fails.
    pub max_attempts: usize,
    /// Double-edge swaps applied per realized edge.
    pub swaps_per_edge: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            max_attempts: 100,
            swaps_per_edge: 10,
        }
    }
}

/// Samples a degree sequence and realizes it, retrying on non-graphical draws.
pub fn generate_graph(
    spec: &DegreeSpec,
    n: usize,
    rng: &mut impl Rng,
    opts: GenerateOptions,
) -> Result<Graph, NetgenError> {
    for _ in 0..opts.max_attempts {
        let degrees = sample_degree_sequence(spec, n, rng)?;
        let swaps = opts.swaps_per_edge * degrees.iter().sum::<usize>() / 2;
        match realize_graph(&degrees, rng, swaps) {
            Ok(graph) => return Ok(graph),
            Err(NetgenError::NotGraphical { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(NetgenError::RetriesExhausted(opts.max_attempts))
}

/// Friends-of-friends graph on the same node index space: pairs of eligible
/// nodes joined by a length-2 path and not already directly connected.
pub fn friends_of_friends(graph: &Graph, eligible: &[usize]) -> Result<Graph, NetgenError> {
    let n = graph.node_count();
    let mut mask = vec![false; n];
    for &node in eligible {
        if node >= n {
            return Err(NetgenError::EligibleOutOfRange(node));
        }
        mask[node] = true;
    }
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    for mid in 0..n {
        let nb = graph.neighbors(mid);
        for (a, &i) in nb.iter().enumerate() {
            if !mask[i] {
                continue;
            }
            for &j in &nb[a + 1..] {
                if !mask[j] || graph.contains_edge(i, j) {
                    continue;
                }
                pairs.insert((i, j));
            }
        }
    }
    Graph::from_edges(n, pairs)
}

/// Edge-indexed view of a graph: per-edge endpoints and per-node incident
/// edge indices.
#[derive(Debug, Clone)]
pub struct IncidenceView {
    pub edges: Vec<(usize, usize)>,
    pub node_edges: Vec<Vec<usize>>,
}

pub fn incidence(graph: &Graph) -> IncidenceView {
    let mut node_edges = vec![Vec::new(); graph.node_count()];
    for (idx, &(u, v)) in graph.edges().iter().enumerate() {
        node_edges[u].push(idx);
        node_edges[v].push(idx);
    }
    IncidenceView {
        edges: graph.edges().to_vec(),
        node_edges,
    }
}
