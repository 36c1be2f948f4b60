//! Finite quotient graphs carrying Jacobi parameters.
//!
//! A [`QuotientGraph`] is a connected, leafless multigraph with a potential
//! `b` on every vertex and a positive hopping weight `a` on every edge.
//! Self-loops and parallel edges are allowed. The periodic operator lives on
//! the universal cover of this graph; nothing here ever stores the cover.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("graph is disconnected: vertex {vertex} is unreachable from vertex 0")]
    Disconnected { vertex: usize },
    #[error("vertex {vertex} is a leaf (degree {degree})")]
    HasLeaf { vertex: usize, degree: usize },
    #[error("edge {edge} has non-positive weight a = {a}")]
    NonpositiveWeight { edge: usize, a: f64 },
    #[error("{what} is not finite")]
    NonFinite { what: String },
    #[error("vertex ids must be exactly 0..{count}; got {id}")]
    BadVertexId { id: i64, count: usize },
    #[error("edge ids must be exactly 0..{count}; got {id}")]
    BadEdgeId { id: i64, count: usize },
    #[error("edge {edge} references unknown vertex {vertex}")]
    UnknownEndpoint { edge: usize, vertex: i64 },
    #[error("malformed graph file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVertex {
    pub id: i64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEdge {
    pub id: i64,
    pub u: i64,
    pub v: i64,
    pub a: f64,
}

/// Unchecked graph description, as read from a graph file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGraph {
    pub vertices: Vec<RawVertex>,
    pub edges: Vec<RawEdge>,
}

impl RawGraph {
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("raw graph serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub a: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

/// One orientation of an edge. Index `2 * edge + parity`; parity 0 runs
/// `u -> v`, parity 1 runs `v -> u`. A self-loop yields two distinct
/// directed edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedEdge(pub usize);

impl DirectedEdge {
    pub fn new(edge: usize, reversed: bool) -> Self {
        DirectedEdge(2 * edge + reversed as usize)
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn edge(self) -> usize {
        self.0 >> 1
    }

    pub fn is_reversed(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn reverse(self) -> Self {
        DirectedEdge(self.0 ^ 1)
    }
}

impl fmt::Display for DirectedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}{}", self.edge(), if self.is_reversed() { "-" } else { "+" })
    }
}

/// A validated quotient graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientGraph {
    b: Vec<f64>,
    edges: Vec<Edge>,
    degree: Vec<usize>,
    /// Directed edges leaving each vertex, ordered by directed-edge index.
    outgoing: Vec<Vec<DirectedEdge>>,
}

impl QuotientGraph {
    /// Builds and validates a graph from dense vertex potentials and
    /// `(u, v, a)` edge triples.
    pub fn new(b: Vec<f64>, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let raw = RawGraph {
            vertices: b
                .iter()
                .enumerate()
                .map(|(id, &b)| RawVertex { id: id as i64, b })
                .collect(),
            edges: edges
                .iter()
                .enumerate()
                .map(|(id, &(u, v, a))| RawEdge { id: id as i64, u: u as i64, v: v as i64, a })
                .collect(),
        };
        validate(&raw)
    }

    /// Number of vertices; also the period of the lifted operator.
    pub fn p(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> usize {
        self.edges.len()
    }

    /// Fundamental rank `q - p + 1`.
    pub fn rank(&self) -> usize {
        self.q() + 1 - self.p()
    }

    pub fn period(&self) -> usize {
        self.p()
    }

    pub fn potentials(&self) -> &[f64] {
        &self.b
    }

    pub fn b(&self, vertex: usize) -> f64 {
        self.b[vertex]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.degree[vertex]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    pub fn num_directed(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = DirectedEdge> {
        (0..self.num_directed()).map(DirectedEdge)
    }

    pub fn tail(&self, e: DirectedEdge) -> usize {
        let edge = &self.edges[e.edge()];
        if e.is_reversed() {
            edge.v
        } else {
            edge.u
        }
    }

    pub fn head(&self, e: DirectedEdge) -> usize {
        self.tail(e.reverse())
    }

    pub fn weight(&self, e: DirectedEdge) -> f64 {
        self.edges[e.edge()].a
    }

    pub fn outgoing(&self, vertex: usize) -> &[DirectedEdge] {
        &self.outgoing[vertex]
    }

    pub fn has_zero_potential(&self) -> bool {
        self.b.iter().all(|&b| b == 0.0)
    }

    /// Constant degree, if the graph is regular.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.degree[0];
        self.degree.iter().all(|&x| x == d).then_some(d)
    }

    /// The lift is a line (a 2-regular tree).
    pub fn is_line(&self) -> bool {
        self.regular_degree() == Some(2)
    }

    /// Row-sum bound `max_j (|b_j| + sum of a over edges at j)`, self-loops
    /// counted twice. The spectrum of the lifted operator lies in `[-R, R]`.
    pub fn schur_norm_bound(&self) -> f64 {
        let mut rows: Vec<f64> = self.b.iter().map(|b| b.abs()).collect();
        for e in &self.edges {
            rows[e.u] += e.a;
            rows[e.v] += e.a;
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Returns a copy with all Jacobi parameters multiplied by `gamma`.
    pub fn scaled(&self, gamma: f64) -> Result<Self, GraphError> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e.u, e.v, gamma * e.a)).collect();
        QuotientGraph::new(self.b.iter().map(|b| gamma * b).collect(), &edges)
    }

    pub fn to_raw(&self) -> RawGraph {
        RawGraph {
            vertices: self
                .b
                .iter()
                .enumerate()
                .map(|(id, &b)| RawVertex { id: id as i64, b })
                .collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(id, e)| RawEdge { id: id as i64, u: e.u as i64, v: e.v as i64, a: e.a })
                .collect(),
        }
    }
}

/// Checks a raw description and produces a [`QuotientGraph`].
///
/// Ids must be dense (`0..p` and `0..q`) but may appear in any order.
pub fn validate(raw: &RawGraph) -> Result<QuotientGraph, GraphError> {
    let p = raw.vertices.len();
    if p == 0 {
        return Err(GraphError::Empty);
    }
    let mut b = vec![None; p];
    for v in &raw.vertices {
        let slot = usize::try_from(v.id)
            .ok()
            .filter(|&i| i < p && b[i].is_none())
            .ok_or(GraphError::BadVertexId { id: v.id, count: p })?;
        if !v.b.is_finite() {
            return Err(GraphError::NonFinite { what: format!("potential b of vertex {}", v.id) });
        }
        b[slot] = Some(v.b);
    }
    let b: Vec<f64> = b.into_iter().map(|x| x.expect("dense ids")).collect();

    let q = raw.edges.len();
    let mut edges = vec![None; q];
    for e in &raw.edges {
        let slot = usize::try_from(e.id)
            .ok()
            .filter(|&i| i < q && edges[i].is_none())
            .ok_or(GraphError::BadEdgeId { id: e.id, count: q })?;
        let endpoint = |x: i64| {
            usize::try_from(x)
                .ok()
                .filter(|&i| i < p)
                .ok_or(GraphError::UnknownEndpoint { edge: slot, vertex: x })
        };
        let (u, v) = (endpoint(e.u)?, endpoint(e.v)?);
        if !e.a.is_finite() {
            return Err(GraphError::NonFinite { what: format!("weight a of edge {slot}") });
        }
        if e.a <= 0.0 {
            return Err(GraphError::NonpositiveWeight { edge: slot, a: e.a });
        }
        edges[slot] = Some(Edge { u, v, a: e.a });
    }
    let edges: Vec<Edge> = edges.into_iter().map(|x| x.expect("dense ids")).collect();

    let mut degree = vec![0usize; p];
    let mut outgoing = vec![Vec::new(); p];
    for (id, e) in edges.iter().enumerate() {
        degree[e.u] += 1;
        degree[e.v] += 1;
        outgoing[e.u].push(DirectedEdge::new(id, false));
        outgoing[e.v].push(DirectedEdge::new(id, true));
    }

    // connectivity first: a disconnected graph may also have leaves, but the
    // component diagnosis is the more useful one
    let mut seen = vec![false; p];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(x) = queue.pop_front() {
        for e in &outgoing[x] {
            let y = if e.is_reversed() { edges[e.edge()].u } else { edges[e.edge()].v };
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    if let Some(vertex) = seen.iter().position(|s| !s) {
        return Err(GraphError::Disconnected { vertex });
    }
    if let Some(vertex) = degree.iter().position(|&d| d < 2) {
        return Err(GraphError::HasLeaf { vertex, degree: degree[vertex] });
    }

    Ok(QuotientGraph { b, edges, degree, outgoing })
}

/// A broken (non-tree) edge, carrying generator `x_generator` of the free
/// group. The `+` connector sits at `plus_vertex` (the edge's `u` end), the
/// `-` connector at `minus_vertex`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrokenEdge {
    pub edge: usize,
    pub generator: usize,
    pub plus_vertex: usize,
    pub minus_vertex: usize,
    pub a: f64,
}

/// Spanning tree plus the `rank` broken edges that generate the free group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanningDecomposition {
    pub seed: u64,
    pub tree_edges: Vec<usize>,
    pub broken: Vec<BrokenEdge>,
}

impl SpanningDecomposition {
    pub fn rank(&self) -> usize {
        self.broken.len()
    }
}

/// BFS spanning tree from vertex 0. Seed 0 explores incident edges in edge-id
/// order; any other seed explores them in a seeded random order. Broken edges
/// are labelled `x_0, x_1, ...` in increasing edge id.
pub fn spanning_decomposition(g: &QuotientGraph, seed: u64) -> SpanningDecomposition {
    let mut order: Vec<usize> = (0..g.q()).collect();
    if seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let mut rank_of = vec![0usize; g.q()];
    for (pos, &e) in order.iter().enumerate() {
        rank_of[e] = pos;
    }

    let mut in_tree = vec![false; g.q()];
    let mut seen = vec![false; g.p()];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        let mut incident: Vec<DirectedEdge> = g.outgoing(x).to_vec();
        incident.sort_by_key(|e| (rank_of[e.edge()], e.index()));
        for e in incident {
            let y = g.head(e);
            if !seen[y] {
                seen[y] = true;
                in_tree[e.edge()] = true;
                queue.push_back(y);
            }
        }
    }

    let tree_edges: Vec<usize> = (0..g.q()).filter(|&e| in_tree[e]).collect();
    let broken = (0..g.q())
        .filter(|&e| !in_tree[e])
        .enumerate()
        .map(|(generator, edge)| {
            let e = g.edge(edge);
            BrokenEdge { edge, generator, plus_vertex: e.u, minus_vertex: e.v, a: e.a }
        })
        .collect();
    SpanningDecomposition { seed, tree_edges, broken }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn minimal_bouquet_is_valid() {
        let g = QuotientGraph::new(vec![0.0], &[(0, 0, 1.0), (0, 0, 1.0)]).unwrap();
        assert_eq!((g.p(), g.q(), g.rank()), (1, 2, 2));
        assert_eq!(g.degree(0), 4);
        assert_eq!(g.num_directed(), 4);
    }

    #[test]
    fn rg_model_counts() {
        let g = fixtures::rg(3, 2);
        assert_eq!((g.p(), g.q(), g.rank()), (5, 6, 2));
        let d = spanning_decomposition(&g, 0);
        assert_eq!(d.tree_edges.len(), 4);
        assert_eq!(d.broken.len(), 2);
    }

    #[test]
    fn path_is_leafy() {
        let err = QuotientGraph::new(vec![0.0, 0.0], &[(0, 1, 1.0)]).unwrap_err();
        assert_eq!(err, GraphError::HasLeaf { vertex: 0, degree: 1 });
    }

    #[test]
    fn disconnected_and_weights() {
        let err = QuotientGraph::new(vec![0.0, 0.0], &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap_err();
        assert_eq!(err, GraphError::Disconnected { vertex: 1 });
        let err = QuotientGraph::new(vec![0.0], &[(0, 0, 1.0), (0, 0, -2.0)]).unwrap_err();
        assert_eq!(err, GraphError::NonpositiveWeight { edge: 1, a: -2.0 });
        let err = QuotientGraph::new(vec![0.0], &[(0, 0, 0.0)]).unwrap_err();
        assert!(matches!(err, GraphError::NonpositiveWeight { edge: 0, .. }));
    }

    #[test]
    fn json_rejects_unknown_keys_and_bad_ids() {
        let ok = r#"{"vertices":[{"id":0,"b":0.5}],"edges":[{"id":0,"u":0,"v":0,"a":1.0},{"id":1,"u":0,"v":0,"a":2.0}]}"#;
        let g = validate(&RawGraph::from_json(ok).unwrap()).unwrap();
        assert_eq!(g.b(0), 0.5);

        let extra = r#"{"vertices":[{"id":0,"b":0,"x":1}],"edges":[]}"#;
        assert!(matches!(RawGraph::from_json(extra), Err(GraphError::Parse(_))));
        let extra_top = r#"{"vertices":[],"edges":[],"name":"x"}"#;
        assert!(matches!(RawGraph::from_json(extra_top), Err(GraphError::Parse(_))));

        let gap = r#"{"vertices":[{"id":1,"b":0}],"edges":[{"id":0,"u":1,"v":1,"a":1}]}"#;
        let err = validate(&RawGraph::from_json(gap).unwrap()).unwrap_err();
        assert_eq!(err, GraphError::BadVertexId { id: 1, count: 1 });

        let dangling = r#"{"vertices":[{"id":0,"b":0}],"edges":[{"id":0,"u":0,"v":3,"a":1}]}"#;
        let err = validate(&RawGraph::from_json(dangling).unwrap()).unwrap_err();
        assert_eq!(err, GraphError::UnknownEndpoint { edge: 0, vertex: 3 });
    }

    #[test]
    fn directed_edge_involution() {
        let g = fixtures::ac(1.0, 0.5);
        for e in g.directed_edges() {
            assert_eq!(e.reverse().reverse(), e);
            assert_ne!(e.reverse(), e);
            assert_eq!(g.tail(e), g.head(e.reverse()));
        }
    }

    #[test]
    fn self_loops_are_always_broken() {
        let g = fixtures::ac(1.0, 0.5);
        let d = spanning_decomposition(&g, 0);
        assert!(d.tree_edges.is_empty());
        assert_eq!(d.broken.iter().map(|b| b.edge).collect::<Vec<_>>(), vec![0, 1]);

        let g = QuotientGraph::new(vec![0.0, 0.0], &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        for seed in 0..10 {
            let d = spanning_decomposition(&g, seed);
            assert_eq!(d.tree_edges, vec![1]);
        }
    }

    #[test]
    fn parallel_edges_keep_one_tree_edge() {
        for d in 2..7 {
            let g = fixtures::regular(d);
            let dec = spanning_decomposition(&g, 0);
            assert_eq!(dec.tree_edges, vec![0]);
            assert_eq!(dec.broken.len(), d - 1);
        }
    }

    #[test]
    fn schur_bound_examples() {
        assert_eq!(fixtures::regular(4).schur_norm_bound(), 4.0);
        let a = 1.0 / 12f64.sqrt();
        assert!((fixtures::ac(a, a).schur_norm_bound() - 4.0 / 12f64.sqrt()).abs() < 1e-15);
        let line = QuotientGraph::new(vec![5.0], &[(0, 0, 1.0)]).unwrap();
        assert_eq!(line.schur_norm_bound(), 7.0);
    }

    #[test]
    fn seeded_decomposition_is_deterministic() {
        let g = fixtures::rg(5, 2);
        for seed in [0, 1, 7, 99] {
            assert_eq!(spanning_decomposition(&g, seed), spanning_decomposition(&g, seed));
        }
    }
}
