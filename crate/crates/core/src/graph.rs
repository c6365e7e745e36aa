//! Immutable directed graphs in compressed row form.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary directed graph with sorted, deduplicated, self-loop-free adjacency.
///
/// Both the out-neighbour view (rows of `A`) and the in-neighbour view
/// (rows of `Aᵀ`) are stored; they are exact transposes of each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
}

impl DirectedGraph {
    /// Edgeless graph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            out_offsets: vec![0; n + 1],
            out_targets: Vec::new(),
            in_offsets: vec![0; n + 1],
            in_sources: Vec::new(),
        }
    }

    /// Build a graph from `(src, dst)` pairs. Duplicates and self-loops are
    /// dropped; the result does not depend on the order of `pairs`.
    pub fn from_edge_list(pairs: &[(usize, usize)], n: usize) -> Result<Self> {
        if let Some((position, &(src, dst))) = pairs
            .iter()
            .enumerate()
            .find(|(_, &(s, d))| s >= n || d >= n)
        {
            return Err(Error::NodeOutOfRange {
                position,
                src,
                dst,
                n,
            });
        }
        let mut edges: Vec<(usize, usize)> =
            pairs.iter().copied().filter(|(s, d)| s != d).collect();
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted_unique(n, &edges))
    }

    /// `edges` must be sorted, unique, in range and loop-free.
    fn from_sorted_unique(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(s, d) in edges {
            out_offsets[s + 1] += 1;
            in_offsets[d + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_targets: Vec<usize> = edges.iter().map(|&(_, d)| d).collect();
        // Sources arrive in ascending order because `edges` is sorted by source.
        let mut in_sources = vec![0usize; edges.len()];
        let mut cursor = in_offsets.clone();
        for &(s, d) in edges {
            in_sources[cursor[d]] = s;
            cursor[d] += 1;
        }
        Self {
            n,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.out_targets.len()
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[i]..self.in_offsets[i + 1]]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_offsets[i + 1] - self.out_offsets[i]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_offsets[i + 1] - self.in_offsets[i]
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.out_degree(i)).collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.in_degree(i)).collect()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        src < self.n && self.out_neighbors(src).binary_search(&dst).is_ok()
    }

    /// Edges in (source, target) lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.out_neighbors(i).iter().map(move |&j| (i, j)))
    }

    pub(crate) fn out_csr(&self) -> (&[usize], &[usize]) {
        (&self.out_offsets, &self.out_targets)
    }

    pub(crate) fn in_csr(&self) -> (&[usize], &[usize]) {
        (&self.in_offsets, &self.in_sources)
    }

    /// Reverse every edge. Swaps the two stored views, so this is O(n + m).
    pub fn transpose(&self) -> Self {
        Self {
            n: self.n,
            out_offsets: self.in_offsets.clone(),
            out_targets: self.in_sources.clone(),
            in_offsets: self.out_offsets.clone(),
            in_sources: self.out_targets.clone(),
        }
    }

    /// Symmetric closure: `(i, j)` is kept iff `(i, j)` or `(j, i)` is an edge.
    pub fn to_undirected(&self) -> Self {
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * self.num_edges());
        for i in 0..self.n {
            // Merge the two sorted rows of A and Aᵀ.
            let (mut a, mut b) = (self.out_neighbors(i), self.in_neighbors(i));
            while !a.is_empty() || !b.is_empty() {
                let next = match (a.first(), b.first()) {
                    (Some(&x), Some(&y)) if x == y => {
                        a = &a[1..];
                        b = &b[1..];
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        a = &a[1..];
                        x
                    }
                    (Some(_), Some(&y)) => {
                        b = &b[1..];
                        y
                    }
                    (Some(&x), None) => {
                        a = &a[1..];
                        x
                    }
                    (None, Some(&y)) => {
                        b = &b[1..];
                        y
                    }
                    (None, None) => unreachable!(),
                };
                edges.push((i, next));
            }
        }
        Self::from_sorted_unique(self.n, &edges)
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(i, j)| self.has_edge(j, i))
    }

    /// Relabel nodes: node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::shape(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.n
            )));
        }
        let pairs: Vec<_> = self.edges().map(|(i, j)| (perm[i], perm[j])).collect();
        Self::from_edge_list(&pairs, self.n)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for (i, j) in self.edges() {
            a[[i, j]] = 1.0;
        }
        a
    }

    pub fn structural_stats(&self) -> StatsReport {
        let n = self.n;
        let m = self.num_edges();
        let pct = |count: usize, total: usize| {
            if total == 0 {
                0.0
            } else {
                100.0 * count as f64 / total as f64
            }
        };
        let zero_in = (0..n).filter(|&i| self.in_degree(i) == 0).count();
        let zero_out = (0..n).filter(|&i| self.out_degree(i) == 0).count();
        let zero_total = (0..n)
            .filter(|&i| self.in_degree(i) == 0 && self.out_degree(i) == 0)
            .count();
        let unidirectional = self.edges().filter(|&(i, j)| !self.has_edge(j, i)).count();
        StatsReport {
            num_nodes: n,
            num_edges: m,
            pct_zero_in: pct(zero_in, n),
            pct_zero_out: pct(zero_out, n),
            pct_zero_total: pct(zero_total, n),
            pct_unidirectional_edges: pct(unidirectional, m),
            no_edges: m == 0,
        }
    }
}

/// Degree and direction statistics, all percentages in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub pct_zero_in: f64,
    pub pct_zero_out: f64,
    pub pct_zero_total: f64,
    /// Share of edges whose reverse is absent; reported as 0 when `no_edges`.
    pub pct_unidirectional_edges: f64,
    pub no_edges: bool,
}

/// Class labels in `0..num_classes` plus optional dense node features.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledNodes {
    labels: Vec<usize>,
    num_classes: usize,
    features: Option<Array2<f64>>,
}

impl LabeledNodes {
    /// `num_classes` defaults to `max(label) + 1`.
    pub fn new(labels: Vec<usize>, num_classes: Option<usize>) -> Result<Self> {
        let inferred = labels.iter().max().map_or(0, |&m| m + 1);
        let num_classes = num_classes.unwrap_or(inferred);
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::config(format!(
                "label {y} of node {i} is not below the class count {num_classes}"
            )));
        }
        Ok(Self {
            labels,
            num_classes,
            features: None,
        })
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.labels.len() {
            return Err(Error::shape(format!(
                "feature matrix has {} rows for {} labelled nodes",
                features.nrows(),
                self.labels.len()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    /// Check that labels cover exactly the nodes of `graph`.
    pub fn check_matches(&self, graph: &DirectedGraph) -> Result<()> {
        if self.labels.len() != graph.num_nodes() {
            return Err(Error::shape(format!(
                "{} labels for a graph with {} nodes",
                self.labels.len(),
                graph.num_nodes()
            )));
        }
        Ok(())
    }
}
