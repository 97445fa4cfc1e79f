//! Communication graphs and consensus weight matrices.
//!
//! A [`WeightMatrix`] is the symmetric doubly stochastic matrix `A` that every
//! node uses to average its neighbours' vectors. Its spectral quantity
//! `beta = max(|lambda_2|, |lambda_N|)` governs how fast repeated mixing drives
//! the nodes to consensus, and it is computed once at construction.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};

/// Resampling budget for Erdos-Renyi graphs that come out disconnected.
pub const MAX_TOPOLOGY_ATTEMPTS: usize = 1000;

const STOCHASTIC_TOL: f64 = 1e-12;
const BETA_CEILING: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Topology {
    Complete,
    Cycle,
    ErdosRenyi { edge_prob: f64 },
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::Complete => "complete",
            Topology::Cycle => "cycle",
            Topology::ErdosRenyi { .. } => "erdos-renyi",
        }
    }
}

/// Undirected, connected, loop-free graph on nodes `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Duplicates and either orientation
    /// are accepted; self-loops, out-of-range endpoints and disconnected edge
    /// sets are rejected.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let graph = Self::unchecked(node_count, edges)?;
        if !graph.is_connected() {
            return Err(Error::AssumptionViolated(format!(
                "graph on {node_count} nodes is not connected"
            )));
        }
        Ok(graph)
    }

    fn unchecked(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if node_count < 2 {
            return Err(invalid(format!("graph needs at least 2 nodes, got {node_count}")));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(invalid(format!("edge ({a}, {b}) out of range for {node_count} nodes")));
            }
            if a == b {
                return Err(invalid(format!("self-loop at node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        adjacency.iter_mut().for_each(|nbrs| nbrs.sort_unstable());
        Ok(Self {
            node_count,
            edges: set,
            adjacency,
        })
    }

    pub fn complete(node_count: usize) -> Result<Self> {
        let edges = (0..node_count).flat_map(|i| (i + 1..node_count).map(move |j| (i, j)));
        Self::from_edges(node_count, edges)
    }

    pub fn cycle(node_count: usize) -> Result<Self> {
        let edges = (0..node_count).map(|i| (i, (i + 1) % node_count));
        Self::from_edges(node_count, edges)
    }

    /// G(N, p) conditioned on connectivity by rejection: each attempt uses a
    /// fresh stream derived from `seed` and the attempt number.
    pub fn erdos_renyi(node_count: usize, edge_prob: f64, seed: u64) -> Result<Self> {
        if node_count < 2 {
            return Err(invalid(format!("graph needs at least 2 nodes, got {node_count}")));
        }
        if !(edge_prob > 0.0 && edge_prob <= 1.0) {
            return Err(invalid(format!("edge probability {edge_prob} not in (0, 1]")));
        }
        for attempt in 0..MAX_TOPOLOGY_ATTEMPTS {
            let mut rng = rng::stream(seed, Purpose::Topology, attempt as u64);
            let mut edges = Vec::new();
            for i in 0..node_count {
                for j in i + 1..node_count {
                    if rng.random::<f64>() < edge_prob {
                        edges.push((i, j));
                    }
                }
            }
            let graph = Self::unchecked(node_count, edges)?;
            if graph.is_connected() {
                return Ok(graph);
            }
        }
        Err(Error::TopologyGeneration {
            attempts: MAX_TOPOLOGY_ATTEMPTS,
        })
    }

    pub fn build(topology: Topology, node_count: usize, seed: u64) -> Result<Self> {
        match topology {
            Topology::Complete => Self::complete(node_count),
            Topology::Cycle => Self::cycle(node_count),
            Topology::ErdosRenyi { edge_prob } => Self::erdos_renyi(node_count, edge_prob, seed),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Edges as `(low, high)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Edge-list text: the node count on the first line, then one
    /// zero-indexed `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.node_count);
        for (a, b) in self.edges() {
            writeln!(out, "{a} {b}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty edge list".into(),
        })?;
        let node_count = header.parse::<usize>().map_err(|e| Error::Parse {
            line,
            message: format!("node count: {e}"),
        })?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let mut parts = l.split_whitespace();
            let mut field = |name: &str| -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("missing {name} endpoint"),
                    })?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse {
                        line,
                        message: format!("{name} endpoint: {e}"),
                    })
            };
            let a = field("first")?;
            let b = field("second")?;
            edges.push((a, b));
        }
        Self::from_edges(node_count, edges)
    }
}

/// Symmetric doubly stochastic consensus matrix with its cached `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    size: usize,
    /// Row-major `size x size` entries.
    entries: Vec<f64>,
    /// Per-row nonzero `(column, weight)` pairs, diagonal included.
    rows: Vec<Vec<(usize, f64)>>,
    beta: f64,
}

impl WeightMatrix {
    /// Metropolis rule: `a_ij = 1 / (1 + max(d_i, d_j))` on edges, zero off
    /// the graph, and the diagonal takes up the slack so rows sum to one.
    pub fn metropolis(graph: &Graph) -> Result<Self> {
        let n = graph.node_count();
        let degrees = graph.degrees();
        let mut entries = vec![0.0; n * n];
        for (a, b) in graph.edges() {
            let w = 1.0 / (1.0 + degrees[a].max(degrees[b]) as f64);
            entries[a * n + b] = w;
            entries[b * n + a] = w;
        }
        for i in 0..n {
            let off: f64 = graph.neighbors(i).iter().map(|&j| entries[i * n + j]).sum();
            entries[i * n + i] = 1.0 - off;
        }
        Self::from_flat(n, entries)
    }

    /// Validates a user-supplied matrix against the consensus assumption:
    /// square, nonnegative, symmetric, rows summing to one and `beta < 1`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("weight matrix must be square"));
        }
        Self::from_flat(n, rows.concat())
    }

    /// Validates against a graph as well: weights off the graph must be zero.
    pub fn from_rows_for_graph(rows: &[Vec<f64>], graph: &Graph) -> Result<Self> {
        let w = Self::from_rows(rows)?;
        if w.size != graph.node_count() {
            return Err(invalid("weight matrix size differs from graph node count"));
        }
        for i in 0..w.size {
            for j in 0..w.size {
                if i != j && !graph.has_edge(i, j) && w.get(i, j) != 0.0 {
                    return Err(Error::AssumptionViolated(format!(
                        "nonzero weight a[{i}][{j}] on a non-edge"
                    )));
                }
            }
        }
        Ok(w)
    }

    fn from_flat(size: usize, entries: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(invalid("weight matrix must be nonempty"));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::AssumptionViolated(format!(
                "weight entries must be finite and nonnegative, found {bad}"
            )));
        }
        for i in 0..size {
            for j in i + 1..size {
                let (a, b) = (entries[i * size + j], entries[j * size + i]);
                if (a - b).abs() > STOCHASTIC_TOL {
                    return Err(Error::AssumptionViolated(format!(
                        "weight matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
            let sum: f64 = entries[i * size..(i + 1) * size].iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::AssumptionViolated(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        let beta = spectral_beta(size, &entries)?;
        Ok(Self::assemble(size, entries, beta))
    }

    /// Skips every consensus check; `beta` is set to NaN. Only meant for
    /// exercising [`WeightMatrix::mix`] with matrices such as the identity.
    #[doc(hidden)]
    pub fn from_rows_unchecked(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        Self::assemble(n, rows.concat(), f64::NAN)
    }

    fn assemble(size: usize, entries: Vec<f64>, beta: f64) -> Self {
        // Row order: self weight, then descending weight, then ascending column.
        let rows = (0..size)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = (0..size)
                    .filter_map(|j| {
                        let w = entries[i * size + j];
                        (w != 0.0).then_some((j, w))
                    })
                    .collect();
                row.sort_by(|a, b| {
                    (b.0 == i)
                        .cmp(&(a.0 == i))
                        .then(b.1.total_cmp(&a.1))
                        .then(a.0.cmp(&b.0))
                });
                row
            })
            .collect();
        Self {
            size,
            entries,
            rows,
            beta,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    /// One synchronous consensus step: row `i` of the result is
    /// `sum_j a_ij * x_j`, read entirely from the input snapshot.
    pub fn mix(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let dim = x.first().map_or(0, Vec::len);
        let mut out = vec![vec![0.0; dim]; x.len()];
        self.mix_into(x, &mut out)?;
        Ok(out)
    }

    /// [`WeightMatrix::mix`] into a caller-owned buffer (the back buffer of a
    /// double-buffered phase loop).
    pub fn mix_into(&self, x: &[Vec<f64>], out: &mut [Vec<f64>]) -> Result<()> {
        if x.len() != self.size || out.len() != self.size {
            return Err(invalid(format!(
                "consensus input has {} rows, weight matrix has {}",
                x.len(),
                self.size
            )));
        }
        let dim = x[0].len();
        if x.iter().any(|r| r.len() != dim) {
            return Err(invalid("consensus rows have different lengths"));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("consensus input contains non-finite values"));
        }
        for (row_weights, target) in self.rows.iter().zip(out.iter_mut()) {
            target.clear();
            target.resize(dim, 0.0);
            for &(j, w) in row_weights {
                for (t, v) in target.iter_mut().zip(&x[j]) {
                    *t += w * v;
                }
            }
        }
        Ok(())
    }
}

/// `beta = max(|lambda_2|, |lambda_N|)` of a symmetric doubly stochastic
/// matrix given row-major.
///
/// The all-ones eigenvector is projected out first (`A - 11^T/N`), so `beta`
/// is the spectral radius of what remains. Errors when `beta` reaches 1: the
/// graph is disconnected or the chain is periodic.
pub fn spectral_beta(size: usize, entries: &[f64]) -> Result<f64> {
    if entries.len() != size * size {
        return Err(invalid("entry count does not match matrix size"));
    }
    if size == 1 {
        return Ok(0.0);
    }
    let avg = 1.0 / size as f64;
    let deflated = DMatrix::from_fn(size, size, |i, j| entries[i * size + j] - avg);
    let eig = SymmetricEigen::new(deflated);
    let beta = eig.eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    if beta >= BETA_CEILING {
        return Err(Error::AssumptionViolated(format!(
            "second largest eigenvalue magnitude {beta} is not below 1"
        )));
    }
    Ok(beta)
}
