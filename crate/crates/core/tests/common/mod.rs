//! Dense reference implementations and random inputs shared by the
//! integration suites. Everything here works on plain dense matrices so it
//! stays independent of the sparse code under test.
#![allow(dead_code)]

use dirgraph::nn::{Activation, LayerKind};
use dirgraph::{DirectedGraph, OperatorKind};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random edge list on `1..=max_n` nodes, self-loops and repeats included.
pub fn edge_list(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..=3 * n)))
}

pub fn graph(max_n: usize) -> impl Strategy<Value = DirectedGraph> {
    edge_list(max_n).prop_map(|(n, e)| DirectedGraph::from_edge_list(&e, n).unwrap())
}

pub fn labelled_graph(
    max_n: usize,
    classes: usize,
) -> impl Strategy<Value = (DirectedGraph, Vec<usize>)> {
    edge_list(max_n).prop_flat_map(move |(n, e)| {
        let g = DirectedGraph::from_edge_list(&e, n).unwrap();
        (Just(g), prop::collection::vec(0..classes, n))
    })
}

pub fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> DirectedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    DirectedGraph::from_edge_list(&edges, n).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

pub fn dense_adjacency(g: &DirectedGraph) -> Array2<f64> {
    let n = g.num_nodes();
    let mut a = Array2::zeros((n, n));
    for (i, j) in g.edges() {
        a[[i, j]] = 1.0;
    }
    a
}

pub fn binary_symmetrization(a: &Array2<f64>) -> Array2<f64> {
    let t = a.t();
    Array2::from_shape_fn(a.dim(), |(i, j)| {
        if a[[i, j]] > 0.0 || t[[i, j]] > 0.0 {
            1.0
        } else {
            0.0
        }
    })
}

pub fn row_sums(a: &Array2<f64>) -> Vec<f64> {
    a.rows().into_iter().map(|r| r.sum()).collect()
}

pub fn col_sums(a: &Array2<f64>) -> Vec<f64> {
    a.columns().into_iter().map(|c| c.sum()).collect()
}

/// `D_r^{-1/2} A D_c^{-1/2}` with zero degrees mapped to zero.
pub fn two_sided_normalize(a: &Array2<f64>) -> Array2<f64> {
    let r = row_sums(a);
    let c = col_sums(a);
    let inv = |d: f64| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 };
    Array2::from_shape_fn(a.dim(), |(i, j)| a[[i, j]] * inv(r[i]) * inv(c[j]))
}

pub fn row_normalize(a: &Array2<f64>) -> Array2<f64> {
    let r = row_sums(a);
    Array2::from_shape_fn(
        a.dim(),
        |(i, j)| if r[i] > 0.0 { a[[i, j]] / r[i] } else { 0.0 },
    )
}

pub fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v.max(0.0))
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub const ALL_KINDS: [OperatorKind; 13] = [
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

pub fn dense_operator(a: &Array2<f64>, kind: OperatorKind) -> Array2<f64> {
    let at = a.t().to_owned();
    let au = binary_symmetrization(a);
    match kind {
        OperatorKind::A => a.clone(),
        OperatorKind::At => at,
        OperatorKind::Au => au,
        OperatorKind::A2 => a.dot(a),
        OperatorKind::At2 => at.dot(&at),
        OperatorKind::AtA => at.dot(a),
        OperatorKind::AAt => a.dot(&at),
        OperatorKind::Au2 => au.dot(&au),
        OperatorKind::SFwdGcn => two_sided_normalize(a),
        OperatorKind::SRowFwd => row_normalize(a),
        OperatorKind::SRowBwd => row_normalize(&at),
        OperatorKind::SSymGcn => two_sided_normalize(&au),
        OperatorKind::SRowUndirected => row_normalize(&au),
    }
}

/// Triple-loop weighted node homophily over a dense matrix.
pub fn oracle_h(s: &Array2<f64>, y: &[usize]) -> Option<f64> {
    let n = y.len();
    let mut sum = 0.0;
    let mut rows = 0;
    for i in 0..n {
        let mut total = 0.0;
        let mut same = 0.0;
        for j in 0..n {
            total += s[[i, j]];
            if y[i] == y[j] {
                same += s[[i, j]];
            }
        }
        if total > 0.0 {
            sum += same / total;
            rows += 1;
        }
    }
    (rows > 0).then(|| sum / rows as f64)
}

fn act(a: Activation, x: Array2<f64>) -> Array2<f64> {
    match a {
        Activation::Relu => relu(&x),
        Activation::Identity => x,
    }
}

/// Dense evaluation of one layer. `w` holds the layer's matrices in
/// parameter-store order.
pub fn dense_layer(
    kind: LayerKind,
    a: &Array2<f64>,
    x: &Array2<f64>,
    w: &[Array2<f64>],
    alpha: f64,
    f: Activation,
) -> Array2<f64> {
    let at = a.t().to_owned();
    let au = binary_symmetrization(a);
    let pre = match kind {
        LayerKind::DirGcn => {
            let s = two_sided_normalize(a);
            s.dot(&x.dot(&w[0])) * (2.0 * alpha) + s.t().dot(&x.dot(&w[1])) * (2.0 * (1.0 - alpha))
        }
        LayerKind::DirSage => {
            x.dot(&w[0])
                + row_normalize(a).dot(&x.dot(&w[1])) * (2.0 * alpha)
                + row_normalize(&at).dot(&x.dot(&w[2])) * (2.0 * (1.0 - alpha))
        }
        LayerKind::Gcn => two_sided_normalize(&au).dot(&x.dot(&w[0])),
        LayerKind::Sage => x.dot(&w[0]) + row_normalize(&au).dot(&x.dot(&w[1])),
    };
    act(f, pre)
}
