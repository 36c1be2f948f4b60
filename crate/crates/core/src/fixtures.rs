//! Standard models used throughout the tests, benches and CLI fixtures.

use crate::graph::QuotientGraph;

/// Free Laplacian on the `d`-regular tree, as the cover of two vertices
/// joined by `d` parallel edges.
pub fn regular(d: usize) -> QuotientGraph {
    assert!(d >= 2, "regular tree needs d >= 2");
    fts(&vec![1.0; d])
}

/// Free Laplacian on the `2l`-regular tree as the cover of one vertex with
/// `l` self-loops.
pub fn bouquet(loops: usize) -> QuotientGraph {
    let edges: Vec<_> = (0..loops).map(|_| (0, 0, 1.0)).collect();
    QuotientGraph::new(vec![0.0], &edges).expect("bouquet is valid")
}

/// The free operator on the line: one vertex, one self-loop.
pub fn line() -> QuotientGraph {
    bouquet(1)
}

/// One vertex, two self-loops with weights `a` and `c`.
pub fn ac(a: f64, c: f64) -> QuotientGraph {
    QuotientGraph::new(vec![0.0], &[(0, 0, a), (0, 0, c)]).expect("ac model is valid")
}

/// Two vertices joined by three edges with weights `a`, `c`, `e`.
pub fn ace(a: f64, c: f64, e: f64) -> QuotientGraph {
    QuotientGraph::new(vec![0.0, 0.0], &[(0, 1, a), (0, 1, c), (0, 1, e)]).expect("ace model is valid")
}

/// Complete bipartite red/green graph: vertices `0..r` are red (degree `g`),
/// vertices `r..r+g` green (degree `r`); edge `i*g + j` joins red `i` to
/// green `j`. All `a = 1`, `b = 0`.
pub fn rg(r: usize, g: usize) -> QuotientGraph {
    assert!(r >= 2 && g >= 2, "rg model needs r, g >= 2");
    let mut edges = Vec::with_capacity(r * g);
    for i in 0..r {
        for j in 0..g {
            edges.push((i, r + j, 1.0));
        }
    }
    QuotientGraph::new(vec![0.0; r + g], &edges).expect("rg model is valid")
}

/// Two vertices with potentials `+b` (vertex 0) and `-b` (vertex 1) joined
/// by `d` edges of weight 1.
pub fn period_two(d: usize, b: f64) -> QuotientGraph {
    assert!(d >= 2);
    let edges: Vec<_> = (0..d).map(|_| (0, 1, 1.0)).collect();
    QuotientGraph::new(vec![b, -b], &edges).expect("period-two model is valid")
}

/// Two vertices joined by one edge per weight, zero potential.
pub fn fts(weights: &[f64]) -> QuotientGraph {
    assert!(weights.len() >= 2);
    let edges: Vec<_> = weights.iter().map(|&a| (0, 1, a)).collect();
    QuotientGraph::new(vec![0.0, 0.0], &edges).expect("two-vertex model is valid")
}

/// Named fixture set shared by the integration suites and the CLI.
pub fn catalog() -> Vec<(&'static str, QuotientGraph)> {
    vec![
        ("regular3", regular(3)),
        ("regular4", regular(4)),
        ("regular6", regular(6)),
        ("bouquet2", bouquet(2)),
        ("ac_1_0.5", ac(1.0, 0.5)),
        ("rg_3_2", rg(3, 2)),
        ("rg_5_2", rg(5, 2)),
        ("p2_3_0.5", period_two(3, 0.5)),
        ("p2_3_1", period_two(3, 1.0)),
        ("p2_4_0.5", period_two(4, 0.5)),
        ("p2_4_1", period_two(4, 1.0)),
        ("ace_1_0.4_0.4", ace(1.0, 0.4, 0.4)),
        ("fts_1.5_1_1", fts(&[1.5, 1.0, 1.0])),
    ]
}
