//! Graph storage, ingestion, and synthetic workload generation.
//!
//! Graphs are stored in compressed sparse row (CSR) form: the neighbor list
//! of node `v` is the slice `csr_neighbors[csr_offsets[v]..csr_offsets[v+1]]`.
//! A node's neighbors are the nodes it aggregates from, so `degree(v)` is the
//! aggregation fan-in of `v`. Neighbor lists are kept sorted ascending by ID,
//! which pins a canonical storage order and makes downstream accumulation
//! deterministic.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Sparse adjacency in CSR form with optional per-edge weights.
///
/// Invariants (checked at construction):
/// - `csr_offsets` is non-decreasing, starts at 0, ends at `csr_neighbors.len()`
/// - every neighbor ID is `< num_nodes`
/// - if `edge_weights` is present it is aligned with `csr_neighbors`
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    csr_offsets: Vec<usize>,
    csr_neighbors: Vec<NodeId>,
    /// Absent means every edge has weight 1.0.
    edge_weights: Option<Vec<f64>>,
    directed: bool,
}

impl Graph {
    /// Builds a graph from raw CSR arrays without re-sorting neighbor lists.
    ///
    /// Structural invariants are still validated. Used by tests that need a
    /// non-canonical (unsorted) neighbor order.
    pub fn from_raw_parts(
        num_nodes: usize,
        csr_offsets: Vec<usize>,
        csr_neighbors: Vec<NodeId>,
        edge_weights: Option<Vec<f64>>,
        directed: bool,
    ) -> Result<Self> {
        if csr_offsets.len() != num_nodes + 1 {
            return Err(Error::Graph(format!(
                "offsets length {} != num_nodes + 1 = {}",
                csr_offsets.len(),
                num_nodes + 1
            )));
        }
        if csr_offsets[0] != 0 {
            return Err(Error::Graph("offsets[0] must be 0".into()));
        }
        if csr_offsets[num_nodes] != csr_neighbors.len() {
            return Err(Error::Graph(format!(
                "offsets[{}] = {} != neighbor count {}",
                num_nodes,
                csr_offsets[num_nodes],
                csr_neighbors.len()
            )));
        }
        if csr_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Graph("offsets must be non-decreasing".into()));
        }
        if let Some(&bad) = csr_neighbors.iter().find(|&&v| (v as usize) >= num_nodes) {
            return Err(Error::Graph(format!(
                "neighbor ID {bad} out of range for {num_nodes} nodes"
            )));
        }
        if let Some(w) = &edge_weights {
            if w.len() != csr_neighbors.len() {
                return Err(Error::Graph(format!(
                    "edge weight count {} != neighbor count {}",
                    w.len(),
                    csr_neighbors.len()
                )));
            }
        }
        Ok(Graph {
            num_nodes,
            csr_offsets,
            csr_neighbors,
            edge_weights,
            directed,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored directed edges (an undirected edge counts twice).
    pub fn num_edges(&self) -> usize {
        self.csr_neighbors.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn csr_offsets(&self) -> &[usize] {
        &self.csr_offsets
    }

    pub fn csr_neighbors(&self) -> &[NodeId] {
        &self.csr_neighbors
    }

    /// Aggregation fan-in of `v`.
    pub fn degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        self.csr_offsets[v + 1] - self.csr_offsets[v]
    }

    /// Neighbor IDs of `v` in stored (canonically ascending) order.
    pub fn neighbor_ids(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.csr_neighbors[self.csr_offsets[v]..self.csr_offsets[v + 1]]
    }

    /// The `k`-th stored `(neighbor, weight)` entry of `v`.
    pub fn neighbor_entry(&self, v: NodeId, k: usize) -> (NodeId, f64) {
        let idx = self.csr_offsets[v as usize] + k;
        let w = self.edge_weights.as_deref().map_or(1.0, |ws| ws[idx]);
        (self.csr_neighbors[idx], w)
    }

    /// `(neighbor, weight)` pairs of `v` in stored order. Weight defaults to
    /// 1.0 when the graph carries no explicit edge weights.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        let v = v as usize;
        let range = self.csr_offsets[v]..self.csr_offsets[v + 1];
        let weights = self.edge_weights.as_deref();
        range.map(move |idx| {
            let w = weights.map_or(1.0, |ws| ws[idx]);
            (self.csr_neighbors[idx], w)
        })
    }

    pub fn degree_stats(&self) -> DegreeStats {
        DegreeStats::of(self)
    }
}

/// Per-node degree array plus summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub degrees: Vec<u32>,
    pub min: u32,
    pub max: u32,
    pub mean: f64,
}

impl DegreeStats {
    pub fn of(g: &Graph) -> Self {
        let degrees: Vec<u32> = (0..g.num_nodes())
            .map(|v| g.degree(v as NodeId) as u32)
            .collect();
        let min = degrees.iter().copied().min().unwrap_or(0);
        let max = degrees.iter().copied().max().unwrap_or(0);
        let mean = if degrees.is_empty() {
            0.0
        } else {
            g.num_edges() as f64 / g.num_nodes() as f64
        };
        DegreeStats {
            degrees,
            min,
            max,
            mean,
        }
    }
}

/// Builds a CSR graph from an edge list, canonicalizing each neighbor list to
/// ascending ID order. Duplicate edges are preserved; for equal IDs the input
/// order of weights is kept (stable sort).
pub fn build_csr(edges: &[(NodeId, NodeId, f64)], num_nodes: usize, directed: bool) -> Result<Graph> {
    for &(src, dst, _) in edges {
        if src as usize >= num_nodes || dst as usize >= num_nodes {
            return Err(Error::Graph(format!(
                "edge ({src}, {dst}) out of range for {num_nodes} nodes"
            )));
        }
    }

    let mut offsets = vec![0usize; num_nodes + 1];
    for &(src, _, _) in edges {
        offsets[src as usize + 1] += 1;
    }
    for i in 1..=num_nodes {
        offsets[i] += offsets[i - 1];
    }

    // Stable bucket fill, then a stable per-row sort by neighbor ID.
    let mut cursor = offsets.clone();
    let mut neighbors = vec![0 as NodeId; edges.len()];
    let mut weights = vec![0.0f64; edges.len()];
    for &(src, dst, w) in edges {
        let at = cursor[src as usize];
        neighbors[at] = dst;
        weights[at] = w;
        cursor[src as usize] += 1;
    }
    let mut any_nonunit = false;
    for v in 0..num_nodes {
        let range = offsets[v]..offsets[v + 1];
        let mut row: Vec<(NodeId, f64)> = neighbors[range.clone()]
            .iter()
            .copied()
            .zip(weights[range.clone()].iter().copied())
            .collect();
        row.sort_by_key(|&(id, _)| id);
        for (slot, (id, w)) in range.zip(row) {
            neighbors[slot] = id;
            weights[slot] = w;
            if w != 1.0 {
                any_nonunit = true;
            }
        }
    }

    let edge_weights = if any_nonunit { Some(weights) } else { None };
    Graph::from_raw_parts(num_nodes, offsets, neighbors, edge_weights, directed)
}

/// Loads a whitespace-separated edge list: one `src dst` or `src dst weight`
/// per line; lines starting with `#` are comments; blank lines are skipped.
/// With `undirected`, both directions of each edge are materialized (a
/// self-loop in the input is stored once).
pub fn load_edge_list(path: impl AsRef<Path>, num_nodes: usize, undirected: bool) -> Result<Graph> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);

    let mut edges: Vec<(NodeId, NodeId, f64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(&display, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let src = parse_node(fields.next(), &display, lineno, "source")?;
        let dst = parse_node(fields.next(), &display, lineno, "destination")?;
        let weight = match fields.next() {
            Some(tok) => tok.parse::<f64>().map_err(|_| Error::EdgeList {
                path: display.clone(),
                line: lineno,
                msg: format!("malformed weight '{tok}'"),
            })?,
            None => 1.0,
        };
        if fields.next().is_some() {
            return Err(Error::EdgeList {
                path: display.clone(),
                line: lineno,
                msg: "expected 'src dst' or 'src dst weight'".into(),
            });
        }
        for &id in &[src, dst] {
            if id as usize >= num_nodes {
                return Err(Error::EdgeList {
                    path: display.clone(),
                    line: lineno,
                    msg: format!("node ID {id} >= num_nodes {num_nodes}"),
                });
            }
        }
        edges.push((src, dst, weight));
        if undirected && src != dst {
            edges.push((dst, src, weight));
        }
    }

    build_csr(&edges, num_nodes, !undirected)
}

fn parse_node(tok: Option<&str>, path: &str, line: usize, what: &str) -> Result<NodeId> {
    let tok = tok.ok_or_else(|| Error::EdgeList {
        path: path.to_string(),
        line,
        msg: format!("missing {what} node ID"),
    })?;
    tok.parse::<NodeId>().map_err(|_| Error::EdgeList {
        path: path.to_string(),
        line,
        msg: format!("malformed {what} node ID '{tok}'"),
    })
}

/// Generates a directed graph whose in-degrees follow a truncated discrete
/// power law `P(d) ∝ d^(-gamma)` on `d ∈ [1, max_degree]`. Each node's
/// neighbors are drawn uniformly without replacement from the other nodes.
/// Deterministic for a given seed.
pub fn generate_power_law_graph(
    n: usize,
    gamma: f64,
    max_degree: usize,
    seed: u64,
) -> Result<Graph> {
    if n < 2 {
        return Err(Error::Graph(format!("need at least 2 nodes, got {n}")));
    }
    if !(gamma > 1.0) {
        return Err(Error::Graph(format!("gamma must be > 1, got {gamma}")));
    }
    if max_degree == 0 || max_degree >= n {
        return Err(Error::Graph(format!(
            "max_degree must be in [1, n-1], got {max_degree} for n = {n}"
        )));
    }

    let pmf: Vec<f64> = (1..=max_degree)
        .map(|d| (d as f64).powf(-gamma))
        .collect();
    let degree_dist = WeightedIndex::new(&pmf).expect("pmf weights are positive");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(NodeId, NodeId, f64)> = Vec::new();
    for v in 0..n {
        let degree = degree_dist.sample(&mut rng) + 1;
        // Sample from 0..n-1 and shift past v to exclude self-loops.
        let picks = rand::seq::index::sample(&mut rng, n - 1, degree);
        for idx in picks.iter() {
            let neighbor = if idx >= v { idx + 1 } else { idx };
            edges.push((v as NodeId, neighbor as NodeId, 1.0));
        }
    }

    build_csr(&edges, n, true)
}

/// Analytic mean of the truncated power-law degree distribution by direct
/// summation: `E[d] = Σ d·d^(-gamma) / Σ d^(-gamma)` over `d ∈ [1, max_degree]`.
pub fn power_law_mean_degree(gamma: f64, max_degree: usize) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for d in 1..=max_degree {
        let w = (d as f64).powf(-gamma);
        num += d as f64 * w;
        den += w;
    }
    num / den
}

/// Analytic variance of the truncated power-law degree distribution.
pub fn power_law_degree_variance(gamma: f64, max_degree: usize) -> f64 {
    let mean = power_law_mean_degree(gamma, max_degree);
    let mut num = 0.0;
    let mut den = 0.0;
    for d in 1..=max_degree {
        let w = (d as f64).powf(-gamma);
        num += (d as f64) * (d as f64) * w;
        den += w;
    }
    num / den - mean * mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_minimal_two_node_graph() {
        let f = write_temp("0 1\n1 0\n");
        let g = load_edge_list(f.path(), 2, false).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.degree_stats().degrees, vec![1, 1]);
    }

    #[test]
    fn load_empty_file_gives_isolated_nodes() {
        let f = write_temp("");
        let g = load_edge_list(f.path(), 3, false).unwrap();
        assert_eq!(g.degree_stats().degrees, vec![0, 0, 0]);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn load_undirected_materializes_both_directions() {
        let f = write_temp("# comment\n0 1 2.5\n");
        let g = load_edge_list(f.path(), 2, true).unwrap();
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![(1, 2.5)]);
        assert_eq!(g.neighbors(1).collect::<Vec<_>>(), vec![(0, 2.5)]);
    }

    #[test]
    fn load_rejects_out_of_range_id_naming_line() {
        let f = write_temp("0 1\n5 0\n");
        let err = load_edge_list(f.path(), 2, false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "error should name line 2: {msg}");
        assert!(msg.contains('5'));
    }

    #[test]
    fn load_rejects_malformed_line() {
        let f = write_temp("0 x\n");
        let err = load_edge_list(f.path(), 2, false).unwrap_err();
        assert!(err.to_string().contains("malformed"));
    }

    #[test]
    fn build_csr_single_edge_offsets() {
        let g = build_csr(&[(0, 1, 1.0)], 2, true).unwrap();
        assert_eq!(g.csr_offsets(), &[0, 1, 1]);
    }

    #[test]
    fn build_csr_sorts_neighbors_ascending() {
        let g = build_csr(&[(1, 2, 1.0), (1, 0, 1.0)], 3, true).unwrap();
        assert_eq!(
            g.neighbors(1).collect::<Vec<_>>(),
            vec![(0, 1.0), (2, 1.0)]
        );
    }

    #[test]
    fn build_csr_total_matches_brute_force_count() {
        // Oracle: count edges per node directly from the input list.
        let edges: Vec<(NodeId, NodeId, f64)> = vec![
            (0, 1, 1.0),
            (3, 2, 1.0),
            (1, 4, 1.0),
            (0, 2, 1.0),
            (4, 4, 1.0),
            (2, 0, 1.0),
            (3, 0, 1.0),
            (1, 1, 1.0),
            (0, 3, 1.0),
            (4, 0, 1.0),
        ];
        let mut brute = [0usize; 5];
        for &(src, _, _) in &edges {
            brute[src as usize] += 1;
        }
        let g = build_csr(&edges, 5, true).unwrap();
        assert_eq!(g.csr_offsets()[5], 10);
        for v in 0..5 {
            assert_eq!(g.degree(v as NodeId), brute[v]);
        }
    }

    #[test]
    fn build_csr_rejects_out_of_range() {
        assert!(build_csr(&[(0, 9, 1.0)], 3, true).is_err());
    }

    #[test]
    fn neighbors_of_isolated_node_is_empty() {
        let g = build_csr(&[(0, 1, 1.0)], 3, true).unwrap();
        assert_eq!(g.neighbors(2).count(), 0);
    }

    #[test]
    fn two_node_undirected_neighbors() {
        let f = write_temp("0 1\n");
        let g = load_edge_list(f.path(), 2, true).unwrap();
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![(1, 1.0)]);
    }

    #[test]
    fn power_law_max_degree_one_forces_degree_one() {
        let g = generate_power_law_graph(2, 2.0, 1, 3).unwrap();
        assert_eq!(g.degree_stats().degrees, vec![1, 1]);
    }

    #[test]
    fn power_law_same_seed_identical() {
        let a = generate_power_law_graph(50, 2.2, 10, 42).unwrap();
        let b = generate_power_law_graph(50, 2.2, 10, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_power_law_graph(50, 2.2, 10, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn power_law_mean_within_three_sigma_of_analytic() {
        let n = 1000;
        let (gamma, max_degree) = (2.2, 50);
        let g = generate_power_law_graph(n, gamma, max_degree, 7).unwrap();
        let analytic = power_law_mean_degree(gamma, max_degree);
        let sigma_mean = (power_law_degree_variance(gamma, max_degree) / n as f64).sqrt();
        let observed = g.degree_stats().mean;
        assert!(
            (observed - analytic).abs() <= 3.0 * sigma_mean,
            "observed {observed} vs analytic {analytic} (3σ = {})",
            3.0 * sigma_mean
        );
    }

    #[test]
    fn power_law_rejects_max_degree_at_or_above_n() {
        assert!(generate_power_law_graph(4, 2.0, 4, 0).is_err());
        assert!(generate_power_law_graph(4, 2.0, 5, 0).is_err());
        assert!(generate_power_law_graph(4, 1.0, 2, 0).is_err());
    }

    #[test]
    fn degree_stats_mean_consistency() {
        let g = build_csr(&[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)], 3, true).unwrap();
        let stats = g.degree_stats();
        assert_eq!(stats.mean, 1.0);
        assert!(stats.min as f64 <= stats.mean && stats.mean <= stats.max as f64);
        assert_eq!(
            stats.degrees.iter().map(|&d| d as usize).sum::<usize>(),
            g.csr_offsets()[g.num_nodes()]
        );
    }

    #[test]
    fn from_raw_parts_validates() {
        assert!(Graph::from_raw_parts(2, vec![0, 1, 1], vec![1], None, true).is_ok());
        assert!(Graph::from_raw_parts(2, vec![0, 2, 1], vec![1], None, true).is_err());
        assert!(Graph::from_raw_parts(2, vec![0, 1, 1], vec![7], None, true).is_err());
        assert!(Graph::from_raw_parts(2, vec![0, 1], vec![1], None, true).is_err());
    }
}
