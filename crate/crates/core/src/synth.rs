//! Synthetic inputs: heterophily-controlled preferential-attachment digraphs
//! and the in-mean versus out-mean direction task.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, LabeledNodes};

/// Preferential-attachment generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PAConfig {
    pub num_nodes: usize,
    pub num_classes: usize,
    /// Out-edges created by every non-seed node.
    pub edges_per_node: usize,
    /// Row-stochastic `C×C` class compatibility used as attachment weight.
    pub compatibility: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PAConfig {
    /// Compatibility `h·I + (1−h)/(C−1)·(1−I)`, i.e. a new node attaches to
    /// its own class with relative weight `h`.
    pub fn with_target_homophily(
        num_nodes: usize,
        num_classes: usize,
        edges_per_node: usize,
        homophily: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&homophily) {
            return Err(Error::config(format!(
                "target homophily {homophily} outside [0, 1]"
            )));
        }
        if num_classes == 0 {
            return Err(Error::config("at least one class is required"));
        }
        let off = if num_classes > 1 {
            (1.0 - homophily) / (num_classes - 1) as f64
        } else {
            0.0
        };
        let compatibility = (0..num_classes)
            .map(|k| {
                (0..num_classes)
                    .map(|l| match (k == l, num_classes) {
                        (true, 1) => 1.0,
                        (true, _) => homophily,
                        (false, _) => off,
                    })
                    .collect()
            })
            .collect();
        let cfg = Self {
            num_nodes,
            num_classes,
            edges_per_node,
            compatibility,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges_per_node == 0 {
            return Err(Error::config("edges per node must be at least 1"));
        }
        if self.num_nodes <= self.edges_per_node {
            return Err(Error::config(format!(
                "need more than {} nodes, got {}",
                self.edges_per_node, self.num_nodes
            )));
        }
        if self.num_classes == 0 || self.compatibility.len() != self.num_classes {
            return Err(Error::config("compatibility matrix must be C x C"));
        }
        for (k, row) in self.compatibility.iter().enumerate() {
            if row.len() != self.num_classes {
                return Err(Error::config("compatibility matrix must be C x C"));
            }
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::config(format!(
                    "compatibility row {k} has a negative entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "compatibility row {k} sums to {sum}"
                )));
            }
        }
        Ok(())
    }
}

/// Fenwick tree over integer weights.
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, idx: usize, delta: i64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i64 + delta) as u64;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: u64) -> usize {
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Per-class attachment pools with weight `in-degree + 1` per member.
struct Pools {
    members: Vec<Vec<usize>>,
    local: Vec<usize>,
    trees: Vec<Fenwick>,
    totals: Vec<u64>,
}

impl Pools {
    fn new(labels: &[usize], num_classes: usize) -> Self {
        let mut members = vec![Vec::new(); num_classes];
        let mut local = vec![0; labels.len()];
        for (v, &y) in labels.iter().enumerate() {
            local[v] = members[y].len();
            members[y].push(v);
        }
        let trees = members.iter().map(|m| Fenwick::new(m.len())).collect();
        Self {
            members,
            local,
            trees,
            totals: vec![0; num_classes],
        }
    }

    fn adjust(&mut self, class: usize, node: usize, delta: i64) {
        self.trees[class].add(self.local[node], delta);
        self.totals[class] = (self.totals[class] as i64 + delta) as u64;
    }
}

/// Grow a directed graph node by node; every new node sends `m` edges to
/// distinct earlier nodes drawn with weight `(in-degree + 1)·H[y_new, y_old]`.
/// The first `m` nodes form an isolated seed set.
pub fn preferential_attachment(cfg: &PAConfig) -> Result<(DirectedGraph, LabeledNodes)> {
    cfg.validate()?;
    let n = cfg.num_nodes;
    let c = cfg.num_classes;
    let m = cfg.edges_per_node;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    let mut pools = Pools::new(&labels, c);
    let mut in_degree = vec![0u64; n];
    for v in 0..m {
        pools.adjust(labels[v], v, 1);
    }
    let mut edges = Vec::with_capacity(m * (n - m));
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut class_w = vec![0.0; c];
    for v in m..n {
        let y = labels[v];
        chosen.clear();
        for _ in 0..m {
            for (k, w) in class_w.iter_mut().enumerate() {
                *w = cfg.compatibility[y][k] * pools.totals[k] as f64;
            }
            let sum: f64 = class_w.iter().sum();
            if sum <= 0.0 {
                break;
            }
            let mut r = rng.gen::<f64>() * sum;
            let mut class = None;
            for (k, &w) in class_w.iter().enumerate() {
                if w > 0.0 {
                    class = Some(k);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            let class = class.expect("positive total weight");
            let t = rng.gen_range(0..pools.totals[class]);
            let u = pools.members[class][pools.trees[class].find(t)];
            chosen.push(u);
            // Remove for the remaining draws of this node.
            pools.adjust(class, u, -((in_degree[u] + 1) as i64));
        }
        for &u in &chosen {
            pools.adjust(labels[u], u, (in_degree[u] + 2) as i64);
            in_degree[u] += 1;
            edges.push((v, u));
        }
        pools.adjust(y, v, 1);
    }
    let graph = DirectedGraph::from_edge_list(&edges, n)?;
    let labels = LabeledNodes::new(labels, Some(c))?;
    Ok((graph, labels))
}

/// Direction task settings: directed Erdős–Rényi graph over ordered pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionTaskConfig {
    pub num_nodes: usize,
    pub edge_prob: f64,
    pub seed: u64,
}

impl DirectionTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.edge_prob > 0.0 && self.edge_prob < 1.0) {
            return Err(Error::config(format!(
                "edge probability {} outside (0, 1)",
                self.edge_prob
            )));
        }
        Ok(())
    }
}

/// Sample each ordered pair `(i, j)`, `i ≠ j`, independently with
/// probability `p`, using geometric skips over the `n²` slots.
pub fn erdos_renyi_directed(n: usize, p: f64, rng: &mut impl Rng) -> Result<DirectedGraph> {
    let total = (n as u128) * (n as u128);
    let log_q = (1.0 - p).ln();
    let mut edges = Vec::new();
    let mut w: i128 = -1;
    loop {
        let r: f64 = rng.gen();
        let skip = ((1.0 - r).ln() / log_q).floor();
        w += 1 + skip.min(total as f64) as i128;
        if w < 0 || w as u128 >= total {
            break;
        }
        let (i, j) = (
            (w as u128 / n as u128) as usize,
            (w as u128 % n as u128) as usize,
        );
        if i != j {
            edges.push((i, j));
        }
    }
    DirectedGraph::from_edge_list(&edges, n)
}

/// Label 1 iff the mean feature of in-neighbours is strictly greater than
/// the mean feature of out-neighbours; an empty neighbourhood has mean 0.
pub fn direction_labels(graph: &DirectedGraph, features: &[f64]) -> Vec<usize> {
    let mean = |nbrs: &[usize]| {
        if nbrs.is_empty() {
            0.0
        } else {
            nbrs.iter().map(|&j| features[j]).sum::<f64>() / nbrs.len() as f64
        }
    };
    (0..graph.num_nodes())
        .map(|i| usize::from(mean(graph.in_neighbors(i)) > mean(graph.out_neighbors(i))))
        .collect()
}

/// Graph, scalar features uniform on `[-1, 1]` and binary direction labels.
pub fn direction_task(cfg: &DirectionTaskConfig) -> Result<(DirectedGraph, LabeledNodes)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let graph = erdos_renyi_directed(cfg.num_nodes, cfg.edge_prob, &mut rng)?;
    let mut feat_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    feat_rng.set_stream(1);
    let x: Vec<f64> = (0..cfg.num_nodes)
        .map(|_| feat_rng.gen_range(-1.0..=1.0))
        .collect();
    let labels = direction_labels(&graph, &x);
    let features =
        Array2::from_shape_vec((cfg.num_nodes, 1), x).map_err(|e| Error::shape(e.to_string()))?;
    let nodes = LabeledNodes::new(labels, Some(2))?.with_features(features)?;
    Ok((graph, nodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homophily::node_homophily;

    #[test]
    fn fenwick_find() {
        let mut f = Fenwick::new(5);
        for (i, w) in [3, 0, 2, 1, 4].into_iter().enumerate() {
            f.add(i, w);
        }
        let picks: Vec<usize> = (0..10).map(|t| f.find(t)).collect();
        assert_eq!(picks, vec![0, 0, 0, 2, 2, 3, 4, 4, 4, 4]);
    }

    #[test]
    fn single_class_out_degrees() {
        let cfg = PAConfig::with_target_homophily(10, 1, 1, 1.0, 3).unwrap();
        let (g, y) = preferential_attachment(&cfg).unwrap();
        assert_eq!(y.labels(), &[0; 10]);
        assert_eq!(g.out_degree(0), 0);
        assert!((1..10).all(|v| g.out_degree(v) == 1));
        assert!(g.edges().all(|(i, j)| j < i));
    }

    #[test]
    fn out_degree_sum_and_no_bidirectional_edges() {
        let cfg = PAConfig::with_target_homophily(300, 4, 3, 0.4, 11).unwrap();
        let (g, _) = preferential_attachment(&cfg).unwrap();
        assert_eq!(g.num_edges(), 3 * (300 - 3));
        assert!(g.edges().all(|(i, j)| !g.has_edge(j, i)));
        assert_eq!(g.structural_stats().pct_unidirectional_edges, 100.0);
    }

    #[test]
    fn determinism() {
        let cfg = PAConfig::with_target_homophily(200, 5, 2, 0.3, 99).unwrap();
        assert_eq!(
            preferential_attachment(&cfg).unwrap(),
            preferential_attachment(&cfg).unwrap()
        );
        let t = DirectionTaskConfig {
            num_nodes: 300,
            edge_prob: 0.02,
            seed: 5,
        };
        assert_eq!(direction_task(&t).unwrap(), direction_task(&t).unwrap());
    }

    #[test]
    fn pure_homophily_with_zero_weights() {
        // Identity compatibility: only same-class candidates are eligible.
        let cfg = PAConfig::with_target_homophily(200, 3, 2, 1.0, 1).unwrap();
        let (g, y) = preferential_attachment(&cfg).unwrap();
        assert!(g.num_edges() <= 2 * 198);
        assert_eq!(node_homophily(&g, y.labels()).unwrap().value, 1.0);
    }

    #[test]
    fn invalid_configs() {
        assert!(PAConfig::with_target_homophily(2, 2, 2, 0.5, 0).is_err());
        assert!(PAConfig::with_target_homophily(10, 2, 0, 0.5, 0).is_err());
        assert!(PAConfig::with_target_homophily(10, 2, 1, 1.5, 0).is_err());
        let mut cfg = PAConfig::with_target_homophily(10, 2, 1, 0.5, 0).unwrap();
        cfg.compatibility[0] = vec![0.7, 0.7];
        assert!(cfg.validate().is_err());
        let t = DirectionTaskConfig {
            num_nodes: 10,
            edge_prob: 1.0,
            seed: 0,
        };
        assert!(direction_task(&t).is_err());
    }

    #[test]
    fn direction_rule() {
        // node 1: in-neighbour 0 (0.5), out-neighbour 2 (-0.5) -> 1.
        let g = DirectedGraph::from_edge_list(&[(0, 1), (1, 2)], 4).unwrap();
        let labels = direction_labels(&g, &[0.5, 0.0, -0.5, 0.9]);
        assert_eq!(labels[1], 1);
        // node 3 is isolated: 0 > 0 is false.
        assert_eq!(labels[3], 0);
    }

    #[test]
    fn task_labels_recompute() {
        let t = DirectionTaskConfig {
            num_nodes: 500,
            edge_prob: 0.01,
            seed: 2,
        };
        let (g, y) = direction_task(&t).unwrap();
        let x: Vec<f64> = y.features().unwrap().column(0).to_vec();
        assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(direction_labels(&g, &x), y.labels());
    }
}
