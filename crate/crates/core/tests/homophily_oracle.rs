mod common;

use common::*;
use dirgraph::homophily::{
    compatibility_matrix, edge_homophily, weighted_compatibility_matrix, weighted_node_homophily,
    REPORT_ORDER,
};
use dirgraph::{
    effective_homophily, node_homophily, DirectedGraph, Error, Execution, OperatorKind,
    SparseMatrix,
};
use ndarray::Array2;
use proptest::prelude::*;

fn oracle_compat(s: &Array2<f64>, y: &[usize], c: usize) -> Vec<Option<Vec<f64>>> {
    (0..c)
        .map(|k| {
            let mut num = vec![0.0; c];
            let mut den = 0.0;
            for i in 0..y.len() {
                for j in 0..y.len() {
                    if y[i] == k {
                        den += s[[i, j]];
                        num[y[j]] += s[[i, j]];
                    }
                }
            }
            (den > 0.0).then(|| num.iter().map(|v| v / den).collect())
        })
        .collect()
}

fn g(edges: &[(usize, usize)], n: usize) -> DirectedGraph {
    DirectedGraph::from_edge_list(edges, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn sparse_metrics_match_brute_force((graph, y) in labelled_graph(8, 3)) {
        let a = dense_adjacency(&graph);
        for kind in REPORT_ORDER {
            let dense = dense_operator(&a, kind);
            let sparse = kind.build(&graph, Execution::Sequential);
            match (weighted_node_homophily(&sparse, &y), oracle_h(&dense, &y)) {
                (Ok(got), Some(want)) => prop_assert!((got.value - want).abs() <= 1e-12, "{kind}: {} vs {want}", got.value),
                (Err(Error::NoEdges), None) => {}
                (got, want) => prop_assert!(false, "{kind}: {got:?} vs {want:?}"),
            }
            let compat = weighted_compatibility_matrix(&sparse, &y, 3).unwrap();
            for (k, row) in oracle_compat(&dense, &y, 3).into_iter().enumerate() {
                match row {
                    Some(want) => {
                        let got = compat.row(k).unwrap();
                        for l in 0..3 {
                            prop_assert!((got[l] - want[l]).abs() <= 1e-12);
                        }
                    }
                    None => prop_assert!(!compat.is_valid(k)),
                }
            }
        }
        match node_homophily(&graph, &y) {
            Ok(m) => prop_assert!((m.value - oracle_h(&a, &y).unwrap()).abs() <= 1e-12),
            Err(e) => prop_assert!(matches!(e, Error::NoEdges) && graph.num_edges() == 0),
        }
    }

    #[test]
    fn adjacency_weighting_reduces_to_node_homophily((graph, y) in labelled_graph(20, 4)) {
        prop_assume!(graph.num_edges() > 0);
        let a = OperatorKind::A.build(&graph, Execution::Sequential);
        prop_assert_eq!(weighted_node_homophily(&a, &y).unwrap(), node_homophily(&graph, &y).unwrap());
        let plain = compatibility_matrix(&graph, &y, 4).unwrap();
        let weighted = weighted_compatibility_matrix(&a, &y, 4).unwrap();
        prop_assert_eq!(plain, weighted);
    }

    #[test]
    fn homophily_is_scale_invariant_and_bounded((graph, y) in labelled_graph(16, 3), c in 1e-3f64..1e3) {
        prop_assume!(graph.num_edges() > 0);
        for kind in REPORT_ORDER {
            let s = kind.build(&graph, Execution::Sequential);
            let Ok(h) = weighted_node_homophily(&s, &y) else { continue };
            let hc = weighted_node_homophily(&s.scale(c), &y).unwrap();
            prop_assert!((h.value - hc.value).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&h.value));
            let m1 = weighted_compatibility_matrix(&s, &y, 3).unwrap();
            let m2 = weighted_compatibility_matrix(&s.scale(c), &y, 3).unwrap();
            for k in 0..3 {
                prop_assert_eq!(m1.is_valid(k), m2.is_valid(k));
                if let (Some(r1), Some(r2)) = (m1.row(k), m2.row(k)) {
                    prop_assert!(r1.iter().zip(r2).all(|(a, b)| (a - b).abs() <= 1e-12));
                    prop_assert!((r1.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn class_relabelling_permutes_compatibility((graph, y) in labelled_graph(16, 3), which in 0usize..6) {
        prop_assume!(graph.num_edges() > 0);
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let p = perms[which];
        let z: Vec<usize> = y.iter().map(|&k| p[k]).collect();
        let before = effective_homophily(&graph, &y).unwrap();
        let after = effective_homophily(&graph, &z).unwrap();
        prop_assert_eq!(&before, &after);
        prop_assert_eq!(edge_homophily(&graph, &y).unwrap(), edge_homophily(&graph, &z).unwrap());
        let m1 = compatibility_matrix(&graph, &y, 3).unwrap();
        let m2 = compatibility_matrix(&graph, &z, 3).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                prop_assert_eq!(m1.get(k, l), m2.get(p[k], p[l]));
            }
        }
    }

    #[test]
    fn effective_homophily_is_the_best_operator((graph, y) in labelled_graph(12, 3)) {
        prop_assume!(graph.num_edges() > 0);
        let r = effective_homophily(&graph, &y).unwrap();
        let best = |kinds: &[OperatorKind]| kinds.iter().filter_map(|&k| r.get(k)).fold(0.0, f64::max);
        prop_assert_eq!(r.h_eff_directed, best(&OperatorKind::DIRECTED));
        prop_assert_eq!(r.h_eff_undirected, best(&OperatorKind::UNDIRECTED));
        if r.h_eff_undirected > 0.0 {
            let gain = (r.h_eff_directed - r.h_eff_undirected) / r.h_eff_undirected;
            prop_assert!((r.gain.unwrap() - gain).abs() <= 1e-15);
        }
    }
}

#[test]
fn node_homophily_examples() {
    let two_cycle = g(&[(0, 1), (1, 0)], 2);
    assert_eq!(node_homophily(&two_cycle, &[0, 0]).unwrap().value, 1.0);
    assert_eq!(node_homophily(&two_cycle, &[0, 1]).unwrap().value, 0.0);
    let m = node_homophily(&g(&[(0, 1), (1, 0), (0, 2)], 3), &[0, 0, 1]).unwrap();
    assert_eq!(m.value, 0.75);
    assert_eq!(m.excluded, 1);
    assert!(matches!(
        node_homophily(&DirectedGraph::empty(3), &[0, 0, 0]),
        Err(Error::NoEdges)
    ));
}

#[test]
fn shared_citation_example() {
    let graph = g(&[(0, 2), (1, 2)], 3);
    let y = [0, 0, 1];
    let ata = OperatorKind::AtA.build(&graph, Execution::Sequential);
    let aat = OperatorKind::AAt.build(&graph, Execution::Sequential);
    // Rows 0 and 1 share the out-neighbour 2, which is what AAᵀ counts.
    assert_eq!(aat.get(0, 1), 1.0);
    assert_eq!(aat.get(0, 0), 1.0);
    assert_eq!(weighted_node_homophily(&aat, &y).unwrap().value, 1.0);
    let compat = weighted_compatibility_matrix(&aat, &y, 2).unwrap();
    assert_eq!(compat.row(0), Some(&[1.0, 0.0][..]));
    assert!(!compat.is_valid(1));
    // AᵀA only links node 2 to itself.
    assert_eq!(ata.nnz(), 1);
    assert_eq!(ata.get(2, 2), 2.0);

    let r = effective_homophily(&graph, &y).unwrap();
    assert_eq!(r.h_eff_directed, 1.0);
    let au = binary_symmetrization(&dense_adjacency(&graph));
    let want_u = oracle_h(&au, &y)
        .unwrap()
        .max(oracle_h(&au.dot(&au), &y).unwrap());
    assert!((r.h_eff_undirected - want_u).abs() < 1e-12);
}

#[test]
fn homophilic_cycle_has_no_gain() {
    let graph = g(&[(0, 1), (1, 2), (2, 3), (3, 0)], 4);
    let r = effective_homophily(&graph, &[1, 1, 1, 1]).unwrap();
    assert_eq!(r.h_eff_directed, 1.0);
    assert_eq!(r.h_eff_undirected, 1.0);
    assert_eq!(r.gain, Some(0.0));
}

#[test]
fn compatibility_examples() {
    let single = compatibility_matrix(&g(&[(0, 1), (1, 2)], 3), &[0, 0, 0], 1).unwrap();
    assert_eq!(single.row(0), Some(&[1.0][..]));
    let anti = compatibility_matrix(&g(&[(0, 1), (1, 0)], 2), &[0, 1], 2).unwrap();
    assert_eq!(anti.row(0), Some(&[0.0, 1.0][..]));
    assert_eq!(anti.row(1), Some(&[1.0, 0.0][..]));
    let fork = g(&[(0, 1), (0, 2)], 3);
    let m = compatibility_matrix(&fork, &[0, 0, 1], 2).unwrap();
    assert_eq!(m.row(0), Some(&[0.5, 0.5][..]));
    assert!(!m.is_valid(1));
    assert_eq!(edge_homophily(&fork, &[0, 0, 1]).unwrap(), 0.5);
    assert_eq!(
        edge_homophily(&g(&[(0, 1), (1, 0)], 2), &[0, 1]).unwrap(),
        0.0
    );
}

#[test]
fn negative_weights_are_rejected() {
    let s = SparseMatrix::from_triplets(2, 2, &[(0, 1, -1.0)]).unwrap();
    assert!(matches!(
        weighted_node_homophily(&s, &[0, 1]),
        Err(Error::Contract(_))
    ));
}
