//! Sparse diffusion operators built from a [`DirectedGraph`].
//!
//! Matrices are stored in compressed row form with sorted column indices,
//! no explicit zeros and no duplicate coordinates. Products accumulate in
//! `f64` with a fixed per-row summation order, so results are bit-stable
//! regardless of the [`Execution`] policy.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::par::Execution;

/// Identifies which construction produced a [`SparseMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    /// Adjacency `A`.
    A,
    /// Transposed adjacency `Aᵀ`.
    At,
    /// Binary symmetrized adjacency.
    Au,
    /// `A·A`.
    A2,
    /// `Aᵀ·Aᵀ`.
    At2,
    /// `Aᵀ·A`: counts common in-neighbours.
    AtA,
    /// `A·Aᵀ`: counts common out-neighbours.
    AAt,
    /// `Au·Au`.
    Au2,
    /// `D→^{-1/2} A D←^{-1/2}`.
    SFwdGcn,
    /// `D→^{-1} A`.
    SRowFwd,
    /// `D←^{-1} Aᵀ`.
    SRowBwd,
    /// `D^{-1/2} Au D^{-1/2}` on the symmetrized graph.
    SSymGcn,
    /// `D^{-1} Au` on the symmetrized graph.
    SRowUndirected,
}

impl OperatorKind {
    /// Operators whose homophily is reported for a directed graph.
    pub const DIRECTED: [OperatorKind; 6] = [
        OperatorKind::A,
        OperatorKind::At,
        OperatorKind::A2,
        OperatorKind::At2,
        OperatorKind::AtA,
        OperatorKind::AAt,
    ];

    /// Operators of the symmetrized graph.
    pub const UNDIRECTED: [OperatorKind; 2] = [OperatorKind::Au, OperatorKind::Au2];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::A => "A",
            OperatorKind::At => "At",
            OperatorKind::Au => "Au",
            OperatorKind::A2 => "A2",
            OperatorKind::At2 => "At2",
            OperatorKind::AtA => "AtA",
            OperatorKind::AAt => "AAt",
            OperatorKind::Au2 => "Au2",
            OperatorKind::SFwdGcn => "S_fwd_gcn",
            OperatorKind::SRowFwd => "S_row_fwd",
            OperatorKind::SRowBwd => "S_row_bwd",
            OperatorKind::SSymGcn => "S_sym_gcn",
            OperatorKind::SRowUndirected => "S_row_u",
        }
    }

    pub fn is_directed(self) -> bool {
        !matches!(
            self,
            OperatorKind::Au
                | OperatorKind::Au2
                | OperatorKind::SSymGcn
                | OperatorKind::SRowUndirected
        )
    }

    /// Build this operator for `graph`.
    pub fn build(self, graph: &DirectedGraph, exec: Execution) -> SparseMatrix {
        match self {
            OperatorKind::A | OperatorKind::At | OperatorKind::Au => adjacency(graph, self),
            OperatorKind::A2 => {
                let a = adjacency(graph, OperatorKind::A);
                spgemm_with(&a, &a, exec).expect("square")
            }
            OperatorKind::At2 => {
                let at = adjacency(graph, OperatorKind::At);
                spgemm_with(&at, &at, exec).expect("square")
            }
            OperatorKind::AtA => {
                let (a, at) = (
                    adjacency(graph, OperatorKind::A),
                    adjacency(graph, OperatorKind::At),
                );
                spgemm_with(&at, &a, exec).expect("square")
            }
            OperatorKind::AAt => {
                let (a, at) = (
                    adjacency(graph, OperatorKind::A),
                    adjacency(graph, OperatorKind::At),
                );
                spgemm_with(&a, &at, exec).expect("square")
            }
            OperatorKind::Au2 => {
                let au = adjacency(graph, OperatorKind::Au);
                spgemm_with(&au, &au, exec).expect("square")
            }
            OperatorKind::SFwdGcn => gcn_normalize_fwd(graph),
            OperatorKind::SRowFwd => row_normalize(&adjacency(graph, OperatorKind::A)),
            OperatorKind::SRowBwd => row_normalize(&adjacency(graph, OperatorKind::At)),
            OperatorKind::SSymGcn => gcn_normalize_sym(graph),
            OperatorKind::SRowUndirected => row_normalize(&adjacency(graph, OperatorKind::Au)),
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            OperatorKind::A,
            OperatorKind::At,
            OperatorKind::Au,
            OperatorKind::A2,
            OperatorKind::At2,
            OperatorKind::AtA,
            OperatorKind::AAt,
            OperatorKind::Au2,
            OperatorKind::SFwdGcn,
            OperatorKind::SRowFwd,
            OperatorKind::SRowBwd,
            OperatorKind::SSymGcn,
            OperatorKind::SRowUndirected,
        ];
        all.into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown operator kind `{s}`")))
    }
}

/// Real-valued sparse matrix in compressed row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            offsets: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Duplicate coordinates are summed; resulting zeros are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::shape(format!(
                    "entry ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    op: "from_triplets",
                });
            }
            t.push((r, c, v));
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut rows = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if rows.last() == Some(&r) && indices.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                indices.push(c);
                values.push(v);
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != 0.0 {
                offsets[r + 1] += 1;
                keep_idx.push(c);
                keep_val.push(v);
            }
        }
        for i in 0..n_rows {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            offsets,
            indices: keep_idx,
            values: keep_val,
        })
    }

    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Result<Self> {
        let triplets: Vec<_> = dense
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((i, j), &v)| (i, j, v))
            .collect();
        Self::from_triplets(dense.nrows(), dense.ncols(), &triplets)
    }

    fn from_csr_unit(n: usize, offsets: &[usize], indices: &[usize]) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            offsets: offsets.to_vec(),
            indices: indices.to_vec(),
            values: vec![1.0; indices.len()],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    /// `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn min_value(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }

    pub fn transpose(&self) -> Self {
        let mut offsets = vec![0usize; self.n_cols + 1];
        for &j in &self.indices {
            offsets[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            offsets[j + 1] += offsets[j];
        }
        let mut cursor = offsets.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.triplets() {
            indices[cursor[j]] = i;
            values[cursor[j]] = v;
            cursor[j] += 1;
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            offsets,
            indices,
            values,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zeros(self.n_rows, self.n_cols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &SparseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let triplets: Vec<_> = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n_rows, self.n_cols));
        for (i, j, v) in self.triplets() {
            d[[i, j]] = v;
        }
        d
    }

    /// Sparse times dense: `self · x`.
    pub fn matmul_dense(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.matmul_dense_with(x, Execution::default())
    }

    pub fn matmul_dense_with(
        &self,
        x: ArrayView2<'_, f64>,
        exec: Execution,
    ) -> Result<Array2<f64>> {
        if x.nrows() != self.n_cols {
            return Err(Error::shape(format!(
                "spmm {:?} x {:?}",
                self.shape(),
                x.dim()
            )));
        }
        let width = x.ncols();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = Array2::<f64>::zeros((self.n_rows, width));
        if width == 0 {
            return Ok(out);
        }
        let slice = out.as_slice_mut().expect("fresh array");
        exec.for_each_row(slice, width, |i, row| {
            let (cols, vals) = self.row(i);
            for (&k, &v) in cols.iter().zip(vals) {
                let src = &xs[k * width..(k + 1) * width];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        });
        Ok(out)
    }

    /// Coordinate-triplet CSV `row,col,value`.
    pub fn write_triplet_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "row,col,value")?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i},{j},{v:?}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Binary adjacency of the requested kind (`A`, `Aᵀ` or the symmetrized `Au`).
///
/// # Panics
/// If `kind` is not one of the three 1-hop binary kinds.
pub fn adjacency(graph: &DirectedGraph, kind: OperatorKind) -> SparseMatrix {
    let n = graph.num_nodes();
    match kind {
        OperatorKind::A => {
            let (o, t) = graph.out_csr();
            SparseMatrix::from_csr_unit(n, o, t)
        }
        OperatorKind::At => {
            let (o, s) = graph.in_csr();
            SparseMatrix::from_csr_unit(n, o, s)
        }
        OperatorKind::Au => {
            let u = graph.to_undirected();
            let (o, t) = u.out_csr();
            SparseMatrix::from_csr_unit(n, o, t)
        }
        other => panic!("{other} is not a binary adjacency kind"),
    }
}

/// `½(A + Aᵀ)`: the averaged symmetrization. Bidirectional pairs get weight 1,
/// one-way edges weight ½ in both directions. Distinct from the binary `Au`.
pub fn averaged_symmetrization(graph: &DirectedGraph) -> SparseMatrix {
    let a = adjacency(graph, OperatorKind::A);
    let at = adjacency(graph, OperatorKind::At);
    a.add(&at).expect("same shape").scale(0.5)
}

/// Sparse-sparse product `l · r`.
pub fn spgemm(l: &SparseMatrix, r: &SparseMatrix) -> Result<SparseMatrix> {
    spgemm_with(l, r, Execution::default())
}

const SPGEMM_CHUNK: usize = 256;

pub fn spgemm_with(l: &SparseMatrix, r: &SparseMatrix, exec: Execution) -> Result<SparseMatrix> {
    if l.n_cols != r.n_rows {
        return Err(Error::shape(format!(
            "spgemm {:?} x {:?}",
            l.shape(),
            r.shape()
        )));
    }
    let n_rows = l.n_rows;
    let n_cols = r.n_cols;
    let chunks = n_rows.div_ceil(SPGEMM_CHUNK);
    // Each chunk owns a dense accumulator; per output entry the summation
    // order is the column order of `l`'s row, then `r`'s row order.
    let parts = exec.map_range(chunks, |c| {
        let lo = c * SPGEMM_CHUNK;
        let hi = (lo + SPGEMM_CHUNK).min(n_rows);
        let mut acc = vec![0.0f64; n_cols];
        let mut marker = vec![usize::MAX; n_cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut lens = Vec::with_capacity(hi - lo);
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for i in lo..hi {
            touched.clear();
            let (lc, lv) = l.row(i);
            for (&k, &a) in lc.iter().zip(lv) {
                let (rc, rv) = r.row(k);
                for (&j, &b) in rc.iter().zip(rv) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            let before = idx.len();
            for &j in &touched {
                if acc[j] != 0.0 {
                    idx.push(j);
                    val.push(acc[j]);
                }
            }
            lens.push(idx.len() - before);
        }
        (lens, idx, val)
    });
    let mut offsets = Vec::with_capacity(n_rows + 1);
    offsets.push(0);
    let total: usize = parts.iter().map(|p| p.1.len()).sum();
    let mut indices = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for (lens, idx, val) in parts {
        for len in lens {
            offsets.push(offsets.last().unwrap() + len);
        }
        indices.extend(idx);
        values.extend(val);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op: "spgemm" });
    }
    Ok(SparseMatrix {
        n_rows,
        n_cols,
        offsets,
        indices,
        values,
    })
}

/// Directed GCN normalization `S→ = D→^{-1/2} A D←^{-1/2}`; the backward
/// operator is its transpose.
pub fn gcn_normalize_fwd(graph: &DirectedGraph) -> SparseMatrix {
    let out_deg = graph.out_degrees();
    let in_deg = graph.in_degrees();
    let mut s = adjacency(graph, OperatorKind::A);
    for i in 0..s.n_rows {
        let (lo, hi) = (s.offsets[i], s.offsets[i + 1]);
        for p in lo..hi {
            let j = s.indices[p];
            s.values[p] = 1.0 / ((out_deg[i] * in_deg[j]) as f64).sqrt();
        }
    }
    s
}

/// Undirected GCN normalization `D^{-1/2} Au D^{-1/2}` (no self-loops added).
pub fn gcn_normalize_sym(graph: &DirectedGraph) -> SparseMatrix {
    let u = graph.to_undirected();
    let deg = u.out_degrees();
    let mut s = adjacency(&u, OperatorKind::A);
    for i in 0..s.n_rows {
        let (lo, hi) = (s.offsets[i], s.offsets[i + 1]);
        for p in lo..hi {
            let j = s.indices[p];
            s.values[p] = 1.0 / ((deg[i] * deg[j]) as f64).sqrt();
        }
    }
    s
}

/// Scale each row to sum to one; empty (or zero-sum) rows are left as is.
pub fn row_normalize(m: &SparseMatrix) -> SparseMatrix {
    let mut out = m.clone();
    for i in 0..out.n_rows {
        let (lo, hi) = (out.offsets[i], out.offsets[i + 1]);
        let sum: f64 = out.values[lo..hi].iter().sum();
        if sum != 0.0 {
            out.values[lo..hi].iter_mut().for_each(|v| *v /= sum);
        }
    }
    out
}

/// The 1- and 2-hop operators used for effective homophily: six for the
/// directed graph, `Au` and `Au²` for the undirected view.
pub fn two_hop_family(graph: &DirectedGraph, directed: bool) -> Vec<(OperatorKind, SparseMatrix)> {
    two_hop_family_with(graph, directed, Execution::default())
}

pub fn two_hop_family_with(
    graph: &DirectedGraph,
    directed: bool,
    exec: Execution,
) -> Vec<(OperatorKind, SparseMatrix)> {
    let kinds: &[OperatorKind] = if directed {
        &OperatorKind::DIRECTED
    } else {
        &OperatorKind::UNDIRECTED
    };
    kinds.iter().map(|&k| (k, k.build(graph, exec))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> DirectedGraph {
        DirectedGraph::from_edge_list(&[(0, 1), (1, 2)], 3).unwrap()
    }

    fn entries(m: &SparseMatrix) -> Vec<(usize, usize, f64)> {
        m.triplets().collect()
    }

    #[test]
    fn adjacency_kinds() {
        let g = path();
        assert_eq!(
            entries(&adjacency(&g, OperatorKind::A)),
            vec![(0, 1, 1.0), (1, 2, 1.0)]
        );
        assert_eq!(
            entries(&adjacency(&g, OperatorKind::At)),
            vec![(1, 0, 1.0), (2, 1, 1.0)]
        );
        let au = adjacency(&g, OperatorKind::Au);
        assert_eq!(au.nnz(), 4);
        assert_eq!(au, au.transpose());
    }

    #[test]
    fn gram_products_on_path() {
        let g = path();
        let a = adjacency(&g, OperatorKind::A);
        let at = adjacency(&g, OperatorKind::At);
        assert_eq!(
            entries(&spgemm(&at, &a).unwrap()),
            vec![(1, 1, 1.0), (2, 2, 1.0)]
        );
        assert_eq!(
            entries(&spgemm(&a, &at).unwrap()),
            vec![(0, 0, 1.0), (1, 1, 1.0)]
        );
        assert_eq!(spgemm(&SparseMatrix::identity(3), &a).unwrap(), a);
        assert!(spgemm(&a, &SparseMatrix::identity(4)).is_err());
    }

    #[test]
    fn gcn_normalization_examples() {
        let s = gcn_normalize_fwd(&DirectedGraph::from_edge_list(&[(0, 1)], 2).unwrap());
        assert_eq!(s.get(0, 1), 1.0);
        let s = gcn_normalize_fwd(&DirectedGraph::from_edge_list(&[(0, 1), (2, 1)], 3).unwrap());
        assert!((s.get(0, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let s = gcn_normalize_fwd(
            &DirectedGraph::from_edge_list(&[(0, 1), (0, 2), (3, 1)], 4).unwrap(),
        );
        assert!((s.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn row_normalize_examples() {
        let m = SparseMatrix::from_triplets(
            3,
            4,
            &[
                (0, 0, 1.0),
                (0, 3, 1.0),
                (2, 0, 1.0),
                (2, 1, 1.0),
                (2, 2, 1.0),
                (2, 3, 1.0),
            ],
        )
        .unwrap();
        let r = row_normalize(&m);
        assert_eq!(r.row(0).1, &[0.5, 0.5]);
        assert!(r.row(1).0.is_empty());
        assert_eq!(r.row(2).1, &[0.25; 4]);
    }

    #[test]
    fn families() {
        let fam = two_hop_family(&path(), true);
        assert_eq!(fam.len(), 6);
        let ata = &fam.iter().find(|(k, _)| *k == OperatorKind::AtA).unwrap().1;
        assert_eq!(entries(ata), vec![(1, 1, 1.0), (2, 2, 1.0)]);

        let edge = DirectedGraph::from_edge_list(&[(0, 1)], 2).unwrap();
        let fam = two_hop_family(&edge, false);
        assert_eq!(fam[0].0, OperatorKind::Au);
        assert_eq!(entries(&fam[1].1), vec![(0, 0, 1.0), (1, 1, 1.0)]);

        for (_, m) in two_hop_family(&DirectedGraph::empty(4), true) {
            assert_eq!(m.nnz(), 0);
        }
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 1, 1.0), (0, 1, -1.0), (1, 0, 2.0), (1, 0, 0.5)],
        )
        .unwrap();
        assert_eq!(entries(&m), vec![(1, 0, 2.5)]);
        assert!(SparseMatrix::from_triplets(1, 1, &[(0, 1, 1.0)]).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in OperatorKind::DIRECTED
            .iter()
            .chain(&OperatorKind::UNDIRECTED)
        {
            assert_eq!(k.name().parse::<OperatorKind>().unwrap(), *k);
        }
        assert!("B".parse::<OperatorKind>().is_err());
    }
}
