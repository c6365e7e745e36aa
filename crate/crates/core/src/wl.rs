//! Color refinement on directed graphs.
//!
//! Four variants differ only in the neighbourhood signature:
//!
//! * `Wl1`: classic 1-WL on the undirected simple graph (each neighbour once,
//!   even when connected both ways);
//! * `Uwl`: colors gathered over every incident edge regardless of direction,
//!   so a reciprocated pair contributes twice;
//! * `Dwl`: separate out- and in-neighbour multisets;
//! * `OutWl`: out-neighbours only, the coloring of a message-passing network
//!   that follows edge direction.
//!
//! Round 0 is the uniform initial coloring; round `t` is the result of `t`
//! refinements. Within a round, colors are numbered in order of first
//! appearance, so runs over several graphs (see [`refine_joint`]) share one
//! relabel table and their colors are comparable.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Variant {
    #[serde(rename = "1wl")]
    Wl1,
    #[serde(rename = "uwl")]
    Uwl,
    #[serde(rename = "dwl")]
    Dwl,
    #[serde(rename = "outwl")]
    OutWl,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Wl1, Variant::Uwl, Variant::Dwl, Variant::OutWl];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Wl1 => "1wl",
            Variant::Uwl => "uwl",
            Variant::Dwl => "dwl",
            Variant::OutWl => "outwl",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown WL variant {s:?}")))
    }
}

/// Signature of node `i`: own color followed by the variant's neighbour
/// multiset(s), each sorted and prefixed by its length.
fn signature(g: &DirectedGraph, colors: &[u32], i: usize, variant: Variant) -> Vec<u32> {
    let out = g.out_neighbors(i);
    let inn = g.in_neighbors(i);
    let mut sig = Vec::with_capacity(3 + out.len() + inn.len());
    sig.push(colors[i]);
    let push_sorted = |sig: &mut Vec<u32>, mut c: Vec<u32>| {
        c.sort_unstable();
        sig.push(c.len() as u32);
        sig.extend(c);
    };
    match variant {
        Variant::Dwl => {
            push_sorted(&mut sig, out.iter().map(|&j| colors[j]).collect());
            push_sorted(&mut sig, inn.iter().map(|&j| colors[j]).collect());
        }
        Variant::OutWl => push_sorted(&mut sig, out.iter().map(|&j| colors[j]).collect()),
        Variant::Uwl => push_sorted(
            &mut sig,
            out.iter().chain(inn).map(|&j| colors[j]).collect(),
        ),
        Variant::Wl1 => {
            // Both lists are sorted: merge them without duplicates.
            let (mut a, mut b) = (0, 0);
            let mut c = Vec::with_capacity(out.len() + inn.len());
            while a < out.len() || b < inn.len() {
                let next = match (out.get(a), inn.get(b)) {
                    (Some(&x), Some(&y)) if x == y => {
                        a += 1;
                        b += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        a += 1;
                        x
                    }
                    (Some(&x), None) => {
                        a += 1;
                        x
                    }
                    (_, Some(&y)) => {
                        b += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                c.push(colors[next]);
            }
            push_sorted(&mut sig, c);
        }
    }
    sig
}

/// Per-round node colors with the relabel table of every round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coloring {
    variant: Variant,
    rounds: Vec<Vec<u32>>,
    /// `tables[t][c]` is the signature that received color `c` in round `t`.
    tables: Vec<Vec<Vec<u32>>>,
    stable_round: Option<usize>,
}

impl Coloring {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn rounds(&self) -> &[Vec<u32>] {
        &self.rounds
    }

    pub fn round(&self, t: usize) -> &[u32] {
        &self.rounds[t]
    }

    pub fn last(&self) -> &[u32] {
        self.rounds.last().expect("round 0 always exists")
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn num_colors(&self, t: usize) -> usize {
        self.tables[t].len()
    }

    /// Signature that was relabelled to color `c` in round `t` (empty for
    /// the initial color).
    pub fn signature(&self, t: usize, c: u32) -> &[u32] {
        &self.tables[t][c as usize]
    }

    /// First round whose partition equals the final one, if refinement
    /// stopped because the partition stabilized.
    pub fn stable_round(&self) -> Option<usize> {
        self.stable_round
    }
}

/// Run color refinement until the partition is stable or `max_rounds`
/// refinements have been made.
pub fn refine(g: &DirectedGraph, variant: Variant, max_rounds: usize) -> Result<Coloring> {
    refine_with(g, variant, max_rounds, Execution::default())
}

const SIGNATURE_CHUNK: usize = 1 << 16;

pub fn refine_with(
    g: &DirectedGraph,
    variant: Variant,
    max_rounds: usize,
    exec: Execution,
) -> Result<Coloring> {
    if max_rounds == 0 {
        return Err(Error::config("at least one refinement round is required"));
    }
    let n = g.num_nodes();
    let initial_table = if n == 0 { Vec::new() } else { vec![Vec::new()] };
    let mut c = Coloring {
        variant,
        rounds: vec![vec![0; n]],
        tables: vec![initial_table],
        stable_round: None,
    };
    for t in 1..=max_rounds {
        let prev = &c.rounds[t - 1];
        let mut dict: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut table = Vec::new();
        let mut next = Vec::with_capacity(n);
        for start in (0..n).step_by(SIGNATURE_CHUNK) {
            let len = SIGNATURE_CHUNK.min(n - start);
            let sigs = exec.map_range(len, |k| signature(g, prev, start + k, variant));
            for sig in sigs {
                let fresh = table.len() as u32;
                let id = *dict.entry(sig).or_insert_with_key(|s| {
                    table.push(s.clone());
                    fresh
                });
                next.push(id);
            }
        }
        let stable = table.len() == c.tables[t - 1].len();
        c.rounds.push(next);
        c.tables.push(table);
        if stable {
            c.stable_round = Some(t - 1);
            break;
        }
    }
    Ok(c)
}

/// Disjoint union with node offsets `[0, n₁, n₁+n₂, …]`.
pub fn disjoint_union(graphs: &[&DirectedGraph]) -> Result<(DirectedGraph, Vec<usize>)> {
    let mut offsets = vec![0];
    let mut edges = Vec::new();
    for g in graphs {
        let base = *offsets.last().expect("non-empty");
        edges.extend(g.edges().map(|(i, j)| (i + base, j + base)));
        offsets.push(base + g.num_nodes());
    }
    let total = *offsets.last().expect("non-empty");
    Ok((DirectedGraph::from_edge_list(&edges, total)?, offsets))
}

/// A coloring of several graphs computed with one shared relabel table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JointColoring {
    pub coloring: Coloring,
    pub offsets: Vec<usize>,
}

impl JointColoring {
    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn colors(&self, graph: usize, t: usize) -> &[u32] {
        &self.coloring.round(t)[self.offsets[graph]..self.offsets[graph + 1]]
    }

    pub fn final_colors(&self, graph: usize) -> &[u32] {
        &self.coloring.last()[self.offsets[graph]..self.offsets[graph + 1]]
    }

    /// Sorted `(color, count)` pairs of one graph in round `t`.
    pub fn histogram(&self, graph: usize, t: usize) -> Vec<(u32, usize)> {
        histogram(self.colors(graph, t))
    }
}

pub fn histogram(colors: &[u32]) -> Vec<(u32, usize)> {
    let mut h: BTreeMap<u32, usize> = BTreeMap::new();
    for &c in colors {
        *h.entry(c).or_default() += 1;
    }
    h.into_iter().collect()
}

/// Refine several graphs jointly; defaults to enough rounds to stabilize.
pub fn refine_joint(
    graphs: &[&DirectedGraph],
    variant: Variant,
    max_rounds: Option<usize>,
) -> Result<JointColoring> {
    refine_joint_with(graphs, variant, max_rounds, Execution::default())
}

pub fn refine_joint_with(
    graphs: &[&DirectedGraph],
    variant: Variant,
    max_rounds: Option<usize>,
    exec: Execution,
) -> Result<JointColoring> {
    let (union, offsets) = disjoint_union(graphs)?;
    let rounds = max_rounds.unwrap_or(union.num_nodes().max(1) + 1);
    Ok(JointColoring {
        coloring: refine_with(&union, variant, rounds, exec)?,
        offsets,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Distinguished,
    PossiblyIsomorphic,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Distinguished => "distinguished",
            Verdict::PossiblyIsomorphic => "possibly-isomorphic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discrimination {
    pub verdict: Verdict,
    /// First round at which the two color histograms differ.
    pub first_round: Option<usize>,
    pub coloring: JointColoring,
}

/// Refine both graphs jointly to stability and compare color histograms.
pub fn distinguishes(g1: &DirectedGraph, g2: &DirectedGraph, variant: Variant) -> Discrimination {
    let coloring =
        refine_joint(&[g1, g2], variant, None).expect("default round budget is positive");
    let first_round = (0..coloring.coloring.num_rounds())
        .find(|&t| coloring.histogram(0, t) != coloring.histogram(1, t));
    Discrimination {
        verdict: if first_round.is_some() {
            Verdict::Distinguished
        } else {
            Verdict::PossiblyIsomorphic
        },
        first_round,
        coloring,
    }
}

/// Whether partition `p1` refines `p2`: equal colors in `p1` imply equal
/// colors in `p2`.
pub fn refines(p1: &[u32], p2: &[u32]) -> Result<bool> {
    if p1.len() != p2.len() {
        return Err(Error::shape(format!(
            "partitions over {} and {} nodes",
            p1.len(),
            p2.len()
        )));
    }
    let mut image: HashMap<u32, u32> = HashMap::new();
    Ok(p1
        .iter()
        .zip(p2)
        .all(|(&a, &b)| *image.entry(a).or_insert(b) == b))
}

/// Exact isomorphism test by backtracking over degree-compatible maps.
pub fn are_isomorphic(g1: &DirectedGraph, g2: &DirectedGraph) -> bool {
    let n = g1.num_nodes();
    if n != g2.num_nodes() || g1.num_edges() != g2.num_edges() {
        return false;
    }
    let deg = |g: &DirectedGraph, i: usize| (g.out_degree(i), g.in_degree(i));
    let mut d1: Vec<_> = (0..n).map(|i| deg(g1, i)).collect();
    let mut d2: Vec<_> = (0..n).map(|i| deg(g2, i)).collect();
    let (s1, s2) = (d1.clone(), d2.clone());
    d1.sort_unstable();
    d2.sort_unstable();
    if d1 != d2 {
        return false;
    }
    fn extend(
        v: usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        g1: &DirectedGraph,
        g2: &DirectedGraph,
        s1: &[(usize, usize)],
        s2: &[(usize, usize)],
    ) -> bool {
        if v == map.len() {
            return true;
        }
        for w in 0..map.len() {
            if used[w] || s1[v] != s2[w] {
                continue;
            }
            let consistent = (0..v).all(|u| {
                g1.has_edge(u, v) == g2.has_edge(map[u], w)
                    && g1.has_edge(v, u) == g2.has_edge(w, map[u])
            });
            if consistent {
                map[v] = w;
                used[w] = true;
                if extend(v + 1, map, used, g1, g2, s1, s2) {
                    return true;
                }
                used[w] = false;
            }
        }
        false
    }
    extend(0, &mut vec![0; n], &mut vec![false; n], g1, g2, &s1, &s2)
}

/// Largest order supported by [`canonical_form`].
pub const MAX_CANONICAL_NODES: usize = 8;

/// Isomorphism-invariant code of a small digraph: node count plus the
/// smallest adjacency bitmask over orderings that respect an invariant
/// directed refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CanonicalForm {
    pub n: usize,
    pub bits: u64,
}

/// Adjacency bitmask under `order`: bit `a·n + b` is set iff `order[a] → order[b]`.
fn bits_under(g: &DirectedGraph, order: &[usize], pos: &mut [usize]) -> u64 {
    let n = order.len();
    for (a, &v) in order.iter().enumerate() {
        pos[v] = a;
    }
    let mut bits = 0u64;
    for (i, j) in g.edges() {
        bits |= 1 << (pos[i] * n + pos[j]);
    }
    bits
}

/// Stable directed refinement with colors ranked by sorted signature, so
/// the numbering itself is isomorphism invariant.
fn invariant_colors(g: &DirectedGraph) -> Vec<u32> {
    let n = g.num_nodes();
    let mut colors = vec![0u32; n];
    let mut classes = usize::from(n > 0);
    loop {
        let sigs: Vec<Vec<u32>> = (0..n)
            .map(|i| signature(g, &colors, i, Variant::Dwl))
            .collect();
        let mut distinct = sigs.clone();
        distinct.sort();
        distinct.dedup();
        colors = sigs
            .iter()
            .map(|s| distinct.binary_search(s).expect("present") as u32)
            .collect();
        if distinct.len() == classes {
            return colors;
        }
        classes = distinct.len();
    }
}

pub fn canonical_form(g: &DirectedGraph) -> Result<CanonicalForm> {
    let n = g.num_nodes();
    if n > MAX_CANONICAL_NODES {
        return Err(Error::config(format!(
            "canonical form supports at most {MAX_CANONICAL_NODES} nodes"
        )));
    }
    let colors = invariant_colors(g);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| colors[v]);
    let mut cells = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || colors[order[k]] != colors[order[start]] {
            cells.push((start, k));
            start = k;
        }
    }
    let mut best = u64::MAX;
    let mut pos = vec![0; n];
    fn permute_cells(
        cell: usize,
        cells: &[(usize, usize)],
        order: &mut Vec<usize>,
        g: &DirectedGraph,
        pos: &mut [usize],
        best: &mut u64,
    ) {
        if cell == cells.len() {
            *best = (*best).min(bits_under(g, order, pos));
            return;
        }
        let (lo, hi) = cells[cell];
        permute_range(lo, hi, cell, cells, order, g, pos, best);
    }
    #[allow(clippy::too_many_arguments)]
    fn permute_range(
        k: usize,
        hi: usize,
        cell: usize,
        cells: &[(usize, usize)],
        order: &mut Vec<usize>,
        g: &DirectedGraph,
        pos: &mut [usize],
        best: &mut u64,
    ) {
        if k + 1 >= hi {
            permute_cells(cell + 1, cells, order, g, pos, best);
            return;
        }
        for s in k..hi {
            order.swap(k, s);
            permute_range(k + 1, hi, cell, cells, order, g, pos, best);
            order.swap(k, s);
        }
    }
    permute_cells(0, &cells, &mut order, g, &mut pos, &mut best);
    Ok(CanonicalForm {
        n,
        bits: if n == 0 { 0 } else { best },
    })
}

/// Graph with node order `0..n` whose adjacency bitmask is `bits`.
pub fn graph_from_bits(n: usize, bits: u64) -> DirectedGraph {
    let edges: Vec<(usize, usize)> = (0..n * n)
        .filter(|&b| bits >> b & 1 == 1)
        .map(|b| (b / n, b % n))
        .collect();
    DirectedGraph::from_edge_list(&edges, n).expect("bits index valid nodes")
}

/// Every labelled loop-free digraph on `n ≤ 5` nodes (`2^(n(n−1))` graphs).
pub fn all_labeled_digraphs(n: usize) -> Result<impl Iterator<Item = DirectedGraph>> {
    if n > 5 {
        return Err(Error::config(
            "labelled enumeration supports at most 5 nodes",
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    Ok((0u64..1 << pairs.len()).map(move |mask| {
        let edges: Vec<_> = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        DirectedGraph::from_edge_list(&edges, n).expect("valid pairs")
    }))
}

/// Largest order accepted by [`enumerate_digraphs`] and [`search_counterexamples`].
pub const MAX_ENUMERATION_NODES: usize = 6;

/// One representative per isomorphism class of digraphs on `n` nodes,
/// sorted by canonical form. Classes on `n` nodes are grown from those on
/// `n − 1` by adding a vertex with every in/out attachment pattern.
pub fn enumerate_digraphs(n: usize, exec: Execution) -> Result<Vec<DirectedGraph>> {
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::config(format!(
            "enumeration supports at most {MAX_ENUMERATION_NODES} nodes"
        )));
    }
    if n == 0 {
        return Ok(vec![DirectedGraph::empty(0)]);
    }
    let mut classes = vec![DirectedGraph::empty(1)];
    for m in 2..=n {
        let prev = m - 1;
        let per_parent = exec.map_slice(&classes, |parent| {
            let base: Vec<(usize, usize)> = parent.edges().collect();
            let mut forms = Vec::with_capacity(1 << (2 * prev));
            for pattern in 0u64..1 << (2 * prev) {
                let mut edges = base.clone();
                for u in 0..prev {
                    if pattern >> u & 1 == 1 {
                        edges.push((prev, u));
                    }
                    if pattern >> (prev + u) & 1 == 1 {
                        edges.push((u, prev));
                    }
                }
                let g = DirectedGraph::from_edge_list(&edges, m).expect("valid nodes");
                forms.push(canonical_form(&g).expect("small graph").bits);
            }
            forms.sort_unstable();
            forms.dedup();
            forms
        });
        let mut all: Vec<u64> = per_parent.into_iter().flatten().collect();
        all.sort_unstable();
        all.dedup();
        classes = all
            .into_iter()
            .map(|bits| graph_from_bits(m, bits))
            .collect();
    }
    Ok(classes)
}

/// A pair of graphs with the verdicts each variant is expected to give.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphPairFixture {
    pub name: String,
    #[serde(serialize_with = "ser_edges")]
    pub g1: DirectedGraph,
    #[serde(serialize_with = "ser_edges")]
    pub g2: DirectedGraph,
    pub expected: Vec<(Variant, Verdict)>,
    pub note: String,
}

fn ser_edges<S: serde::Serializer>(
    g: &DirectedGraph,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Edges {
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
    }
    Edges {
        num_nodes: g.num_nodes(),
        edges: g.edges().collect(),
    }
    .serialize(s)
}

/// In-star with an isolated node versus two disjoint edges: an
/// out-neighbour-only network cannot tell them apart, the directed test can.
/// Nodes are 0-based; the first graph has edges `1→0`, `2→0` and node 3
/// isolated, the second `2→0` and `3→1`.
pub fn in_star_pair() -> GraphPairFixture {
    GraphPairFixture {
        name: "in-star-vs-two-edges".into(),
        g1: DirectedGraph::from_edge_list(&[(1, 0), (2, 0)], 4).expect("static"),
        g2: DirectedGraph::from_edge_list(&[(2, 0), (3, 1)], 4).expect("static"),
        expected: vec![
            (Variant::Wl1, Verdict::Distinguished),
            (Variant::Uwl, Verdict::Distinguished),
            (Variant::Dwl, Verdict::Distinguished),
            (Variant::OutWl, Verdict::PossiblyIsomorphic),
        ],
        note:
            "node 0 of the first graph has in-degree two; out-neighbourhoods match class by class"
                .into(),
    }
}

/// Directed 3-cycle versus the transitive triangle: identical once
/// direction is dropped.
pub fn triangle_pair() -> GraphPairFixture {
    GraphPairFixture {
        name: "cycle-vs-transitive-triangle".into(),
        g1: DirectedGraph::from_edge_list(&[(0, 1), (1, 2), (2, 0)], 3).expect("static"),
        g2: DirectedGraph::from_edge_list(&[(0, 1), (0, 2), (1, 2)], 3).expect("static"),
        expected: vec![
            (Variant::Wl1, Verdict::PossiblyIsomorphic),
            (Variant::Uwl, Verdict::PossiblyIsomorphic),
            (Variant::Dwl, Verdict::Distinguished),
            (Variant::OutWl, Verdict::Distinguished),
        ],
        note: "both are the undirected triangle".into(),
    }
}

/// Non-isomorphic pairs on at most `max_n` nodes that `weak` deems possibly
/// isomorphic and `strong` distinguishes, in canonical order. Graphs of
/// different orders are never paired (every variant separates them).
pub fn search_counterexamples(
    max_n: usize,
    weak: Variant,
    strong: Variant,
    limit: Option<usize>,
    exec: Execution,
) -> Result<Vec<GraphPairFixture>> {
    if max_n > MAX_ENUMERATION_NODES {
        return Err(Error::config(format!(
            "search supports at most {MAX_ENUMERATION_NODES} nodes"
        )));
    }
    let mut found = Vec::new();
    let cap = limit.unwrap_or(usize::MAX);
    for n in 2..=max_n {
        if found.len() >= cap {
            break;
        }
        let classes = enumerate_digraphs(n, exec)?;
        let refs: Vec<&DirectedGraph> = classes.iter().collect();
        let keys = |variant: Variant| -> Result<Vec<Vec<(u32, usize)>>> {
            let joint = refine_joint_with(&refs, variant, None, exec)?;
            Ok((0..refs.len())
                .map(|k| histogram(joint.final_colors(k)))
                .collect())
        };
        let weak_keys = keys(weak)?;
        let strong_keys = keys(strong)?;
        let mut groups: HashMap<&[(u32, usize)], Vec<usize>> = HashMap::new();
        let mut group_order = Vec::new();
        for (k, key) in weak_keys.iter().enumerate() {
            let entry = groups.entry(key.as_slice()).or_default();
            if entry.is_empty() {
                group_order.push(key.as_slice());
            }
            entry.push(k);
        }
        'groups: for key in group_order {
            let members = &groups[key];
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    if strong_keys[i] != strong_keys[j] {
                        found.push(GraphPairFixture {
                            name: format!("n{n}-{i}-{j}"),
                            g1: classes[i].clone(),
                            g2: classes[j].clone(),
                            expected: vec![
                                (weak, Verdict::PossiblyIsomorphic),
                                (strong, Verdict::Distinguished),
                            ],
                            note: format!(
                                "found by exhaustive search over {} classes on {n} nodes",
                                classes.len()
                            ),
                        });
                        if found.len() >= cap {
                            break 'groups;
                        }
                    }
                }
            }
        }
    }
    Ok(found)
}

/// Whether some fixture in `list` matches `pair` up to isomorphism of each
/// graph and order of the two graphs.
pub fn contains_pair(list: &[GraphPairFixture], pair: &GraphPairFixture) -> Result<bool> {
    let key = |g: &DirectedGraph| canonical_form(g);
    let want: HashSet<CanonicalForm> = [key(&pair.g1)?, key(&pair.g2)?].into_iter().collect();
    for f in list {
        let got: HashSet<CanonicalForm> = [key(&f.g1)?, key(&f.g2)?].into_iter().collect();
        if got == want {
            return Ok(true);
        }
    }
    Ok(false)
}
