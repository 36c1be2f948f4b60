//! Finite pieces of the cover: block balls with free or periodic boundary
//! conditions, their eigenvalue counting measures, and exact walk moments.
//!
//! A block ball of radius `r` places one copy of the spanning tree (a lego
//! piece) at every reduced word of length at most `r` in the free group on
//! the broken edges. Vertex `(block, j)` has index `block * p + j`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{spanning_decomposition, QuotientGraph, SpanningDecomposition};

/// Default dimension cap for dense eigensolves.
pub const DEFAULT_CAP: usize = 6000;

/// Cap used internally for sparse walk moments.
const MOMENT_CAP: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TruncationError {
    #[error("ball has dimension {n}, above the cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("word is not reduced at position {position}")]
    NotReduced { position: usize },
    #[error("letter uses generator {generator} but the rank is {rank}")]
    BadGenerator { generator: usize, rank: usize },
    #[error("generator {generator}: {plus} free + connectors against {minus} free - connectors (expected {expected})")]
    UnbalancedConnectors { generator: usize, plus: usize, minus: usize, expected: usize },
    #[error("pairing does not match this ball")]
    PairingMismatch,
}

/// A generator `x_k` or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Letter { generator, inverse }
    }

    pub fn inv(self) -> Self {
        Letter { generator: self.generator, inverse: !self.inverse }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "x{}^-1", self.generator)
        } else {
            write!(f, "x{}", self.generator)
        }
    }
}

pub type Word = Vec<Letter>;

fn check_reduced(w: &[Letter]) -> Result<(), TruncationError> {
    match w.windows(2).position(|p| p[1] == p[0].inv()) {
        Some(i) => Err(TruncationError::NotReduced { position: i + 1 }),
        None => Ok(()),
    }
}

/// Letterwise inverse, without reversing the order.
pub fn opposite_word(w: &[Letter]) -> Result<Word, TruncationError> {
    check_reduced(w)?;
    Ok(w.iter().map(|l| l.inv()).collect())
}

/// All reduced words of length at most `r` over `rank` generators, shortest
/// first. Within a length, words are ordered lexicographically by letter.
pub fn reduced_words(rank: usize, r: usize) -> Vec<Word> {
    let letters: Vec<Letter> = (0..rank).flat_map(|k| [Letter::new(k, false), Letter::new(k, true)]).collect();
    let mut out = vec![Vec::new()];
    let mut start = 0;
    for _ in 0..r {
        let end = out.len();
        for i in start..end {
            for &l in &letters {
                if out[i].last().is_some_and(|&last| last == l.inv()) {
                    continue;
                }
                let mut w = out[i].clone();
                w.push(l);
                out.push(w);
            }
        }
        start = end;
    }
    out
}

/// Number of lattice sites in the block ball: `p (1 + sum_q 2l (2l-1)^(q-1))`.
pub fn ball_dimension(p: usize, rank: usize, r: usize) -> Option<usize> {
    let mut blocks: usize = 1;
    let mut shell: usize = 1;
    for q in 1..=r {
        shell = if q == 1 { 2 * rank } else { shell.checked_mul(2 * rank - 1)? };
        blocks = blocks.checked_add(shell)?;
    }
    blocks.checked_mul(p)
}

/// Real symmetric sparse matrix stored as a diagonal plus adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    diag: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    fn new(n: usize) -> Self {
        SparseSymmetric { diag: vec![0.0; n], adj: vec![Vec::new(); n] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Adds `a` to the `(i, j)` and `(j, i)` entries; a link from a site to
    /// itself therefore adds `2a` to the diagonal.
    fn link(&mut self, i: usize, j: usize, a: f64) {
        if i == j {
            self.diag[i] += 2.0 * a;
        } else {
            self.adj[i].push((j, a));
            self.adj[j].push((i, a));
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = self.diag[i] * x[i];
            for &(j, a) in &self.adj[i] {
                s += a * x[j];
            }
            *yi = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += self.diag[i];
            for &(j, a) in &self.adj[i] {
                m[(i, j)] += a;
            }
        }
        m
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.diag[i].abs() + self.adj[i].iter().map(|e| e.1.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `Tr(H^2)`, computed from the entries.
    pub fn trace_of_square(&self) -> f64 {
        (0..self.dim()).map(|i| self.diag[i].powi(2) + self.adj[i].iter().map(|e| e.1 * e.1).sum::<f64>()).sum()
    }
}

/// An unlinked half-edge of a boundary block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Connector {
    pub block: usize,
    pub generator: usize,
    pub plus: bool,
}

#[derive(Debug, Clone)]
pub struct CoverBlockBall {
    pub decomposition: SpanningDecomposition,
    pub radius: usize,
    pub p: usize,
    pub words: Vec<Word>,
    index: HashMap<Word, usize>,
    pub operator: SparseSymmetric,
    weights: Vec<f64>,
    plus_vertex: Vec<usize>,
    minus_vertex: Vec<usize>,
}

impl CoverBlockBall {
    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn rank(&self) -> usize {
        self.decomposition.rank()
    }

    pub fn blocks(&self) -> usize {
        self.words.len()
    }

    pub fn block_of(&self, w: &[Letter]) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn site(&self, block: usize, vertex: usize) -> usize {
        block * self.p + vertex
    }

    /// Blocks holding words of length exactly `radius`.
    pub fn boundary_blocks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.blocks()).filter(|&b| self.words[b].len() == self.radius)
    }

    /// Connectors of boundary blocks that lead out of the ball.
    pub fn free_connectors(&self) -> Vec<Connector> {
        let mut out = Vec::new();
        for block in self.boundary_blocks() {
            let last = self.words[block].last().copied();
            for generator in 0..self.rank() {
                for plus in [true, false] {
                    // the + connector leads to w x_k, which is the parent when
                    // w ends in x_k^-1
                    let towards = Letter::new(generator, !plus);
                    if last != Some(towards) {
                        out.push(Connector { block, generator, plus });
                    }
                }
            }
        }
        out
    }

    fn connector_site(&self, c: Connector) -> usize {
        let v = if c.plus { self.plus_vertex[c.generator] } else { self.minus_vertex[c.generator] };
        self.site(c.block, v)
    }

    /// `n^-1 sum a^2` over all free connectors: the weight of the length-two
    /// walks of the cover that leave the ball.
    pub fn boundary_defect(&self) -> f64 {
        let s: f64 = self.free_connectors().iter().map(|c| self.weights[c.generator].powi(2)).sum();
        s / self.dim() as f64
    }
}

/// Block ball of radius `r` around the root, using the deterministic
/// spanning decomposition.
pub fn build_ball(g: &QuotientGraph, r: usize, cap: usize) -> Result<CoverBlockBall, TruncationError> {
    build_ball_with(g, &spanning_decomposition(g, 0), r, cap)
}

pub fn build_ball_with(
    g: &QuotientGraph,
    decomposition: &SpanningDecomposition,
    r: usize,
    cap: usize,
) -> Result<CoverBlockBall, TruncationError> {
    let p = g.p();
    let rank = decomposition.rank();
    let n = ball_dimension(p, rank, r).unwrap_or(usize::MAX);
    if n > cap {
        return Err(TruncationError::TooLarge { n, cap });
    }
    let words = reduced_words(rank, r);
    let index: HashMap<Word, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let weights: Vec<f64> = decomposition.broken.iter().map(|b| b.a).collect();
    let plus_vertex: Vec<usize> = decomposition.broken.iter().map(|b| b.plus_vertex).collect();
    let minus_vertex: Vec<usize> = decomposition.broken.iter().map(|b| b.minus_vertex).collect();

    let mut op = SparseSymmetric::new(n);
    for (block, w) in words.iter().enumerate() {
        let base = block * p;
        for j in 0..p {
            op.diag[base + j] = g.b(j);
        }
        for &e in &decomposition.tree_edges {
            let edge = g.edge(e);
            op.link(base + edge.u, base + edge.v, edge.a);
        }
        // link to the parent block
        if let Some((&last, parent)) = w.split_last() {
            let parent = index[parent];
            let k = last.generator;
            let (from, to) = if last.inverse { (block, parent) } else { (parent, block) };
            // `to = from * x_k`: + connector of `from`, - connector of `to`
            op.link(from * p + plus_vertex[k], to * p + minus_vertex[k], weights[k]);
        }
    }
    Ok(CoverBlockBall {
        decomposition: decomposition.clone(),
        radius: r,
        p,
        words,
        index,
        operator: op,
        weights,
        plus_vertex,
        minus_vertex,
    })
}

/// `<delta_j, H^k delta_j>` at the root copy of vertex `j`.
pub fn local_moment(g: &QuotientGraph, vertex: usize, k: usize) -> f64 {
    local_moments(g, vertex, k)[k]
}

/// `<delta_j, H^i delta_j>` for `i = 0..=kmax`.
pub fn local_moments(g: &QuotientGraph, vertex: usize, kmax: usize) -> Vec<f64> {
    let ball = build_ball(g, kmax.div_ceil(2) + 1, MOMENT_CAP).expect("moment ball within the sparse cap");
    moments_from(&ball, vertex, kmax)
}

fn moments_from(ball: &CoverBlockBall, vertex: usize, kmax: usize) -> Vec<f64> {
    // <d, H^(a+b) d> = <H^a d, H^b d>: only half the powers are needed
    let n = ball.dim();
    let mut powers = vec![vec![0.0; n]];
    powers[0][ball.site(0, vertex)] = 1.0;
    for i in 1..=kmax.div_ceil(2) {
        let mut next = vec![0.0; n];
        ball.operator.apply(&powers[i - 1], &mut next);
        powers.push(next);
    }
    (0..=kmax)
        .map(|k| {
            let (a, b) = (k / 2, k - k / 2);
            powers[a].iter().zip(&powers[b]).map(|(x, y)| x * y).sum()
        })
        .collect()
}

/// `(1/p) sum_j <delta_j, H^k delta_j>`.
pub fn dos_moment(g: &QuotientGraph, k: usize) -> f64 {
    dos_moments(g, k)[k]
}

/// DOS moments `0..=kmax` from walks on the cover.
pub fn dos_moments(g: &QuotientGraph, kmax: usize) -> Vec<f64> {
    let ball = build_ball(g, kmax.div_ceil(2) + 1, MOMENT_CAP).expect("moment ball within the sparse cap");
    let mut total = vec![0.0; kmax + 1];
    for j in 0..g.p() {
        for (t, m) in total.iter_mut().zip(moments_from(&ball, j, kmax)) {
            *t += m;
        }
    }
    total.iter().map(|t| t / g.p() as f64).collect()
}

/// Normalised eigenvalue counting measure of a finite operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingMeasure {
    pub eigenvalues: Vec<f64>,
}

impl CountingMeasure {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        CountingMeasure { eigenvalues }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn moment(&self, k: usize) -> f64 {
        self.eigenvalues.iter().map(|l| l.powi(k as i32)).sum::<f64>() / self.len() as f64
    }

    /// Fraction of eigenvalues `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&l| l <= x) as f64 / self.len() as f64
    }

    /// Kolmogorov distance to a continuous distribution function.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.len() as f64;
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let f = cdf(l);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Counts per bin over `bins` equal bins spanning `[lo, hi]`.
    pub fn histogram(&self, lo: f64, hi: f64, bins: usize) -> (Vec<f64>, Vec<usize>) {
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for &l in &self.eigenvalues {
            let t = ((l - lo) / (hi - lo) * bins as f64).floor();
            if t >= 0.0 {
                counts[(t as usize).min(bins - 1)] += 1;
            }
        }
        (edges, counts)
    }
}

/// All eigenvalues of a dense symmetric matrix (Householder
/// tridiagonalisation and implicit QR).
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    m.symmetric_eigenvalues().iter().copied().collect()
}

pub fn free_bc_spectrum(ball: &CoverBlockBall) -> CountingMeasure {
    CountingMeasure::from_eigenvalues(symmetric_eigenvalues(ball.operator.to_dense()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PairingMode {
    Canonical,
    Random { seed: u64 },
}

/// Per generator, the `(plus block, minus block)` pairs to link.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing {
    pub mode: PairingMode,
    pub radius: usize,
    pub links: Vec<Vec<(usize, usize)>>,
}

/// Splits the free connectors by generator and sign, checking that every
/// generator has as many + as - connectors.
fn connectors_by_type(ball: &CoverBlockBall) -> Result<Vec<(Vec<usize>, Vec<usize>)>, TruncationError> {
    let rank = ball.rank();
    let mut by_type = vec![(Vec::new(), Vec::new()); rank];
    for c in ball.free_connectors() {
        let t = &mut by_type[c.generator];
        if c.plus { t.0.push(c.block) } else { t.1.push(c.block) }
    }
    let shells = ball.boundary_blocks().count();
    let expected = if ball.radius == 0 { shells } else { shells / (2 * rank) * (2 * rank - 1) };
    for (generator, (plus, minus)) in by_type.iter().enumerate() {
        if plus.len() != expected || minus.len() != expected {
            return Err(TruncationError::UnbalancedConnectors { generator, plus: plus.len(), minus: minus.len(), expected });
        }
    }
    Ok(by_type)
}

pub fn make_pairing(ball: &CoverBlockBall, mode: PairingMode) -> Result<Pairing, TruncationError> {
    let by_type = connectors_by_type(ball)?;
    let links = match mode {
        PairingMode::Canonical => {
            let mut links = Vec::with_capacity(by_type.len());
            for (generator, (plus, minus)) in by_type.iter().enumerate() {
                let mut pairs = Vec::with_capacity(plus.len());
                for &b in plus {
                    let partner = ball.block_of(&opposite_word(&ball.words[b])?).ok_or(TruncationError::PairingMismatch)?;
                    if minus.binary_search(&partner).is_err() {
                        return Err(TruncationError::UnbalancedConnectors {
                            generator,
                            plus: plus.len(),
                            minus: minus.len(),
                            expected: plus.len(),
                        });
                    }
                    pairs.push((b, partner));
                }
                links.push(pairs);
            }
            links
        }
        PairingMode::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            by_type
                .into_iter()
                .enumerate()
                .map(|(generator, (plus, mut minus))| {
                    rng.set_stream(generator as u64);
                    rng.set_word_pos(0);
                    minus.shuffle(&mut rng);
                    plus.into_iter().zip(minus).collect()
                })
                .collect()
        }
    };
    Ok(Pairing { mode, radius: ball.radius, links })
}

/// The ball operator with the paired connectors linked.
pub fn periodic_operator(ball: &CoverBlockBall, pairing: &Pairing) -> Result<SparseSymmetric, TruncationError> {
    if pairing.radius != ball.radius || pairing.links.len() != ball.rank() {
        return Err(TruncationError::PairingMismatch);
    }
    let mut op = ball.operator.clone();
    for (k, pairs) in pairing.links.iter().enumerate() {
        for &(plus, minus) in pairs {
            if plus >= ball.blocks() || minus >= ball.blocks() {
                return Err(TruncationError::PairingMismatch);
            }
            let i = ball.connector_site(Connector { block: plus, generator: k, plus: true });
            let j = ball.connector_site(Connector { block: minus, generator: k, plus: false });
            op.link(i, j, ball.weights[k]);
        }
    }
    Ok(op)
}

pub fn periodic_bc_spectrum(ball: &CoverBlockBall, pairing: &Pairing) -> Result<CountingMeasure, TruncationError> {
    let op = periodic_operator(ball, pairing)?;
    Ok(CountingMeasure::from_eigenvalues(symmetric_eigenvalues(op.to_dense())))
}

/// Block-level degree of every block once the pairing is added: each of the
/// `2l` connectors of a block is either internal or paired.
pub fn block_degrees(ball: &CoverBlockBall, pairing: &Pairing) -> Vec<usize> {
    let mut deg: Vec<usize> = (0..ball.blocks()).map(|b| if b == 0 { 0 } else { 1 }).collect();
    for w in ball.words.iter().skip(1) {
        let parent = ball.block_of(&w[..w.len() - 1]).expect("prefix closed");
        deg[parent] += 1;
    }
    for pairs in &pairing.links {
        for &(a, b) in pairs {
            deg[a] += 1;
            deg[b] += 1;
        }
    }
    deg
}

/// Both sides of the second-moment defect identity: the moment difference
/// from eigenvalues and the boundary weight sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMomentDefect {
    pub from_spectrum: f64,
    pub from_boundary: f64,
}

pub fn second_moment_defect(g: &QuotientGraph, ball: &CoverBlockBall, measure: &CountingMeasure) -> SecondMomentDefect {
    SecondMomentDefect { from_spectrum: dos_moment(g, 2) - measure.moment(2), from_boundary: ball.boundary_defect() }
}

/// Asymptotic lower bound for the free-boundary defect:
/// `p^-1 (2l-2)/(2l-1) min a^2`, from `s_r / n_r -> p^-1 (2l-2)/(2l-1)` with
/// at least one free connector per boundary block.
pub fn defect_lower_bound(g: &QuotientGraph) -> f64 {
    let l = g.rank() as f64;
    if l < 1.0 {
        return 0.0;
    }
    let min_a2 = g.edges().iter().map(|e| e.a * e.a).fold(f64::INFINITY, f64::min);
    (2.0 * l - 2.0) / (2.0 * l - 1.0) * min_a2 / g.p() as f64
}
