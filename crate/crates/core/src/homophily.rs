//! Label-agreement metrics over graphs and arbitrary non-negative diffusion
//! operators: node and edge homophily, (weighted) compatibility matrices and
//! effective homophily over the 1- and 2-hop operator families.
//!
//! Nodes whose operator row carries no mass are left out of node-level means
//! and counted in `excluded`. Reductions run in node-index order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::operators::{OperatorKind, SparseMatrix};
use crate::par::Execution;

/// A node-level mean together with how many nodes had an empty row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMean {
    pub value: f64,
    pub excluded: usize,
}

fn check_labels(n: usize, labels: &[usize]) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape(format!(
            "{} labels for {n} nodes",
            labels.len()
        )));
    }
    Ok(())
}

fn mean_of_defined(per_node: Vec<Option<f64>>) -> Result<NodeMean> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in per_node.iter().flatten() {
        sum += v;
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoEdges);
    }
    Ok(NodeMean {
        value: sum / count as f64,
        excluded: per_node.len() - count,
    })
}

/// Mean over nodes with out-edges of the fraction of out-neighbours that
/// share the node's label.
pub fn node_homophily(graph: &DirectedGraph, labels: &[usize]) -> Result<NodeMean> {
    check_labels(graph.num_nodes(), labels)?;
    let per_node = (0..graph.num_nodes())
        .map(|i| {
            let nbrs = graph.out_neighbors(i);
            if nbrs.is_empty() {
                return None;
            }
            let same = nbrs.iter().filter(|&&j| labels[j] == labels[i]).count();
            Some(same as f64 / nbrs.len() as f64)
        })
        .collect();
    mean_of_defined(per_node)
}

/// Weighted node homophily of an operator `s`: per row, the share of row
/// mass landing on same-label columns, averaged over rows with positive mass.
pub fn weighted_node_homophily(s: &SparseMatrix, labels: &[usize]) -> Result<NodeMean> {
    weighted_node_homophily_with(s, labels, Execution::default())
}

pub fn weighted_node_homophily_with(
    s: &SparseMatrix,
    labels: &[usize],
    exec: Execution,
) -> Result<NodeMean> {
    if s.n_rows() != s.n_cols() {
        return Err(Error::shape(format!(
            "operator is {:?}, expected square",
            s.shape()
        )));
    }
    check_labels(s.n_rows(), labels)?;
    if let Some(min) = s.min_value() {
        if min < 0.0 {
            return Err(Error::Contract(format!(
                "operator has negative entry {min}"
            )));
        }
    }
    let per_node = exec.map_range(s.n_rows(), |i| {
        let (cols, vals) = s.row(i);
        let mut same = 0.0;
        let mut total = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            total += v;
            if labels[j] == labels[i] {
                same += v;
            }
        }
        (total > 0.0).then(|| same / total)
    });
    mean_of_defined(per_node)
}

/// Fraction of edges joining same-label endpoints.
pub fn edge_homophily(graph: &DirectedGraph, labels: &[usize]) -> Result<f64> {
    check_labels(graph.num_nodes(), labels)?;
    let m = graph.num_edges();
    if m == 0 {
        return Err(Error::NoEdges);
    }
    let same = graph
        .edges()
        .filter(|&(i, j)| labels[i] == labels[j])
        .count();
    Ok(same as f64 / m as f64)
}

/// Row-stochastic class-to-class mass matrix. Rows of classes that send no
/// mass are flagged invalid and hold zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityMatrix {
    values: Vec<Vec<f64>>,
    valid: Vec<bool>,
}

impl CompatibilityMatrix {
    fn from_mass(mass: Array2<f64>) -> Self {
        let c = mass.nrows();
        let mut values = vec![vec![0.0; c]; c];
        let mut valid = vec![false; c];
        for k in 0..c {
            let total: f64 = mass.row(k).sum();
            if total > 0.0 {
                valid[k] = true;
                for l in 0..c {
                    values[k][l] = mass[[k, l]] / total;
                }
            }
        }
        Self { values, valid }
    }

    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    /// Row `k`, or `None` if class `k` sends no mass.
    pub fn row(&self, k: usize) -> Option<&[f64]> {
        self.valid[k].then(|| self.values[k].as_slice())
    }

    pub fn get(&self, k: usize, l: usize) -> Option<f64> {
        self.row(k).map(|r| r[l])
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.valid[k]
    }

    /// CSV with a `class,0,1,..` header; invalid rows print `NA` cells.
    pub fn to_csv_string(&self) -> String {
        let c = self.num_classes();
        let mut out = String::from("class");
        for l in 0..c {
            out.push_str(&format!(",{l}"));
        }
        out.push('\n');
        for k in 0..c {
            out.push_str(&k.to_string());
            for l in 0..c {
                match self.get(k, l) {
                    Some(v) => out.push_str(&format!(",{v:?}")),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_csv_string().as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

fn check_classes(labels: &[usize], num_classes: usize) -> Result<()> {
    if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::config(format!(
            "label {y} not below class count {num_classes}"
        )));
    }
    Ok(())
}

/// Edge-count compatibility matrix `h_kl = |{(i,j): y_i=k, y_j=l}| / |{(i,j): y_i=k}|`.
pub fn compatibility_matrix(
    graph: &DirectedGraph,
    labels: &[usize],
    num_classes: usize,
) -> Result<CompatibilityMatrix> {
    check_labels(graph.num_nodes(), labels)?;
    check_classes(labels, num_classes)?;
    let mut counts = Array2::<f64>::zeros((num_classes, num_classes));
    for (i, j) in graph.edges() {
        counts[[labels[i], labels[j]]] += 1.0;
    }
    Ok(CompatibilityMatrix::from_mass(counts))
}

/// Compatibility matrix with operator mass in place of edge counts.
pub fn weighted_compatibility_matrix(
    s: &SparseMatrix,
    labels: &[usize],
    num_classes: usize,
) -> Result<CompatibilityMatrix> {
    if s.n_rows() != s.n_cols() {
        return Err(Error::shape(format!(
            "operator is {:?}, expected square",
            s.shape()
        )));
    }
    check_labels(s.n_rows(), labels)?;
    check_classes(labels, num_classes)?;
    if let Some(min) = s.min_value() {
        if min < 0.0 {
            return Err(Error::Contract(format!(
                "operator has negative entry {min}"
            )));
        }
    }
    let mut mass = Array2::<f64>::zeros((num_classes, num_classes));
    for (i, j, v) in s.triplets() {
        mass[[labels[i], labels[j]]] += v;
    }
    Ok(CompatibilityMatrix::from_mass(mass))
}

/// Homophily of one operator; `value` is `None` when the operator is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorHomophily {
    pub operator: OperatorKind,
    pub value: Option<f64>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    pub operators: Vec<OperatorHomophily>,
    /// Best homophily over `Au`, `Au²`.
    pub h_eff_undirected: f64,
    /// Best homophily over `A`, `Aᵀ`, `A²`, `(Aᵀ)²`, `AᵀA`, `AAᵀ`.
    pub h_eff_directed: f64,
    /// `(h_eff_d − h_eff_u) / h_eff_u`, absent when `h_eff_u` is zero.
    pub gain: Option<f64>,
}

impl HomophilyReport {
    pub fn get(&self, kind: OperatorKind) -> Option<f64> {
        self.operators
            .iter()
            .find(|o| o.operator == kind)
            .and_then(|o| o.value)
    }

    pub fn gain_percent(&self) -> Option<f64> {
        self.gain.map(|g| 100.0 * g)
    }

    /// Aligned text table with 6 significant digits.
    pub fn to_table(&self) -> String {
        let mut header = String::new();
        let mut row = String::new();
        let mut cell = |name: &str, value: String| {
            let w = name.len().max(value.len()).max(8);
            header.push_str(&format!("{name:>w$}  "));
            row.push_str(&format!("{value:>w$}  "));
        };
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), sig6);
        for o in &self.operators {
            cell(o.operator.name(), fmt(o.value));
        }
        cell("h_eff_u", sig6(self.h_eff_undirected));
        cell("h_eff_d", sig6(self.h_eff_directed));
        cell("gain_%", fmt(self.gain_percent()));
        format!("{}\n{}\n", header.trim_end(), row.trim_end())
    }
}

/// Format with six significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = 6 - 1 - v.abs().log10().floor() as i32;
    if (0..=15).contains(&digits) {
        format!("{:.*}", digits as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

/// Column order of the homophily report.
pub const REPORT_ORDER: [OperatorKind; 8] = [
    OperatorKind::Au,
    OperatorKind::Au2,
    OperatorKind::A,
    OperatorKind::At,
    OperatorKind::AtA,
    OperatorKind::AAt,
    OperatorKind::A2,
    OperatorKind::At2,
];

/// Weighted node homophily of every 1- and 2-hop operator plus the
/// undirected and directed effective homophily.
pub fn effective_homophily(graph: &DirectedGraph, labels: &[usize]) -> Result<HomophilyReport> {
    effective_homophily_with(graph, labels, Execution::default())
}

pub fn effective_homophily_with(
    graph: &DirectedGraph,
    labels: &[usize],
    exec: Execution,
) -> Result<HomophilyReport> {
    check_labels(graph.num_nodes(), labels)?;
    if graph.num_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let mut operators = Vec::with_capacity(REPORT_ORDER.len());
    for kind in REPORT_ORDER {
        // Built one at a time: 2-hop products of large graphs are big.
        let s = kind.build(graph, exec);
        let entry = match weighted_node_homophily_with(&s, labels, exec) {
            Ok(m) => OperatorHomophily {
                operator: kind,
                value: Some(m.value),
                excluded: m.excluded,
            },
            Err(Error::NoEdges) => OperatorHomophily {
                operator: kind,
                value: None,
                excluded: graph.num_nodes(),
            },
            Err(e) => return Err(e),
        };
        operators.push(entry);
    }
    let best = |directed: bool| {
        operators
            .iter()
            .filter(|o| o.operator.is_directed() == directed)
            .filter_map(|o| o.value)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
            .ok_or(Error::NoEdges)
    };
    let h_eff_directed = best(true)?;
    let h_eff_undirected = best(false)?;
    let gain =
        (h_eff_undirected > 0.0).then(|| (h_eff_directed - h_eff_undirected) / h_eff_undirected);
    Ok(HomophilyReport {
        operators,
        h_eff_undirected,
        h_eff_directed,
        gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{adjacency, spgemm};

    fn g(pairs: &[(usize, usize)], n: usize) -> DirectedGraph {
        DirectedGraph::from_edge_list(pairs, n).unwrap()
    }

    #[test]
    fn node_homophily_examples() {
        let two_cycle = g(&[(0, 1), (1, 0)], 2);
        assert_eq!(node_homophily(&two_cycle, &[0, 0]).unwrap().value, 1.0);
        assert_eq!(node_homophily(&two_cycle, &[0, 1]).unwrap().value, 0.0);
        let h = node_homophily(&g(&[(0, 1), (1, 0), (0, 2)], 3), &[0, 0, 1]).unwrap();
        assert_eq!(h.value, 0.75);
        assert_eq!(h.excluded, 1);
        assert!(matches!(
            node_homophily(&g(&[], 3), &[0, 0, 0]),
            Err(Error::NoEdges)
        ));
    }

    #[test]
    fn weighted_examples() {
        let clique = g(&[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)], 3);
        let a = adjacency(&clique, OperatorKind::A);
        assert_eq!(weighted_node_homophily(&a, &[2, 2, 2]).unwrap().value, 1.0);

        let three = g(&[(0, 1), (1, 0), (0, 2)], 3);
        let a = adjacency(&three, OperatorKind::A);
        assert_eq!(weighted_node_homophily(&a, &[0, 0, 1]).unwrap().value, 0.75);

        // Two nodes citing the same target share their out-neighbourhood.
        let shared = g(&[(0, 2), (1, 2)], 3);
        let a = adjacency(&shared, OperatorKind::A);
        let at = adjacency(&shared, OperatorKind::At);
        let aat = spgemm(&a, &at).unwrap();
        assert_eq!(aat.get(0, 1), 1.0);
        assert_eq!(aat.get(1, 0), 1.0);
        assert_eq!(aat.get(0, 0), 1.0);
        let h = weighted_node_homophily(&aat, &[0, 0, 1]).unwrap();
        assert_eq!(h.value, 1.0);
        assert_eq!(h.excluded, 1);
    }

    #[test]
    fn negative_operator_rejected() {
        let s = SparseMatrix::from_triplets(2, 2, &[(0, 1, -1.0)]).unwrap();
        assert!(matches!(
            weighted_node_homophily(&s, &[0, 0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn compatibility_examples() {
        let c = compatibility_matrix(&g(&[(0, 1), (1, 0)], 2), &[0, 0], 1).unwrap();
        assert_eq!(c.row(0), Some(&[1.0][..]));

        let c = compatibility_matrix(&g(&[(0, 1), (1, 0)], 2), &[0, 1], 2).unwrap();
        assert_eq!(c.row(0), Some(&[0.0, 1.0][..]));
        assert_eq!(c.row(1), Some(&[1.0, 0.0][..]));

        let c = compatibility_matrix(&g(&[(0, 1), (0, 2)], 3), &[0, 0, 1], 2).unwrap();
        assert_eq!(c.row(0), Some(&[0.5, 0.5][..]));
        assert!(!c.is_valid(1));
        assert_eq!(c.to_csv_string(), "class,0,1\n0,0.5,0.5\n1,NA,NA\n");
    }

    #[test]
    fn weighted_compatibility_examples() {
        let shared = g(&[(0, 2), (1, 2)], 3);
        let a = adjacency(&shared, OperatorKind::A);
        let aat = spgemm(&a, &adjacency(&shared, OperatorKind::At)).unwrap();
        let c = weighted_compatibility_matrix(&aat, &[0, 0, 1], 2).unwrap();
        assert_eq!(c.row(0), Some(&[1.0, 0.0][..]));
        assert!(!c.is_valid(1));

        let plain = compatibility_matrix(&shared, &[0, 0, 1], 2).unwrap();
        assert_eq!(
            weighted_compatibility_matrix(&a, &[0, 0, 1], 2).unwrap(),
            plain
        );
        assert_eq!(
            weighted_compatibility_matrix(&a.scale(3.5), &[0, 0, 1], 2).unwrap(),
            plain
        );
    }

    #[test]
    fn edge_homophily_examples() {
        assert_eq!(
            edge_homophily(&g(&[(0, 1), (1, 2)], 3), &[4, 4, 4]).unwrap(),
            1.0
        );
        assert_eq!(
            edge_homophily(&g(&[(0, 1), (1, 0)], 2), &[0, 1]).unwrap(),
            0.0
        );
        assert_eq!(
            edge_homophily(&g(&[(0, 1), (0, 2)], 3), &[0, 0, 1]).unwrap(),
            0.5
        );
        assert!(matches!(
            edge_homophily(&g(&[], 2), &[0, 1]),
            Err(Error::NoEdges)
        ));
    }

    #[test]
    fn effective_homophily_cycle() {
        let cycle = g(&[(0, 1), (1, 2), (2, 0)], 3);
        let r = effective_homophily(&cycle, &[1, 1, 1]).unwrap();
        assert_eq!(r.h_eff_directed, 1.0);
        assert_eq!(r.h_eff_undirected, 1.0);
        assert_eq!(r.gain, Some(0.0));
        assert!(matches!(
            effective_homophily(&g(&[], 3), &[0, 0, 0]),
            Err(Error::NoEdges)
        ));
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(0.383), "0.383000");
        assert_eq!(sig6(15.7101), "15.7101");
        assert_eq!(sig6(1.0), "1.00000");
    }
}
