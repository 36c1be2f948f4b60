//! Green's functions and m-functions of the lifted operator.
//!
//! For a directed edge `e = (r -> j)` the m-function `m_e(z)` is the
//! diagonal resolvent entry at `j` of the operator restricted to the half of
//! the cover containing `j` once the lifted edge is cut. They satisfy the
//! coupled system
//!
//! ```text
//! m_e = 1 / (-z + b_j - sum_{f leaving j, f != reverse(e)} a_f^2 m_f)
//! G_j = 1 / (-z + b_j - sum_{f leaving j} a_f^2 m_f)
//! ```
//!
//! with one unknown per directed edge of the quotient graph. The physical
//! solution is the one in the Herglotz cone (`Im m > 0`), which is the one
//! reached by iterating from `m = 0` high in the upper half-plane and
//! following it down.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::graph::{DirectedEdge, QuotientGraph};

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("z = {z} is not in the open upper half-plane")]
    NotInUpperHalfPlane { z: C64 },
    #[error("no convergence at z = {z}: {iterations} iterations, residual {residual:e}")]
    NoConvergence { z: C64, iterations: usize, residual: f64 },
    #[error("path backtracks at step {step}")]
    BacktrackingPath { step: usize },
    #[error("path step {step} does not start where the previous step ended")]
    BrokenPath { step: usize },
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
}

/// A point of the open upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlanePoint(C64);

impl HalfPlanePoint {
    pub fn new(z: C64) -> Result<Self, SolveError> {
        if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
            Ok(HalfPlanePoint(z))
        } else {
            Err(SolveError::NotInUpperHalfPlane { z })
        }
    }

    pub fn from_parts(x: f64, eps: f64) -> Result<Self, SolveError> {
        Self::new(C64::new(x, eps))
    }

    pub fn z(self) -> C64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Target for `max_e |m_e D_e(m) - 1|`.
    pub tol: f64,
    /// Iteration budget for the damped sweep of a cold solve.
    pub max_iter: usize,
    /// Damping `theta` in `m <- (1 - theta) m + theta sweep(m)`.
    pub damping: f64,
    pub plateau_window: usize,
    pub plateau_ratio: f64,
    pub newton_max_iter: usize,
    /// Initial height ratio between successive continuation rungs.
    pub ladder_ratio: f64,
    /// Smallest ratio the adaptive ladder may grow to.
    pub ladder_min_ratio: f64,
    /// Residual accepted when Newton can no longer reduce it. Close to a
    /// branch point the system is nearly singular and `tol` may be out of
    /// reach in floating point.
    pub stall_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-13,
            max_iter: 100_000,
            damping: 0.5,
            plateau_window: 20,
            plateau_ratio: 0.99,
            newton_max_iter: 60,
            ladder_ratio: 0.5,
            ladder_min_ratio: 1.0 / 64.0,
            stall_tol: 1e-7,
        }
    }
}

impl SolverOptions {
    fn check(&self) -> Result<(), SolveError> {
        let bad = |s: &str| Err(SolveError::InvalidOption(s.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.stall_tol >= self.tol) {
            return bad("stall_tol must be at least tol");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.ladder_ratio > 0.0 && self.ladder_ratio < 1.0) {
            return bad("ladder_ratio must lie in (0, 1)");
        }
        if !(self.ladder_min_ratio > 0.0 && self.ladder_min_ratio <= self.ladder_ratio) {
            return bad("ladder_min_ratio must lie in (0, ladder_ratio]");
        }
        Ok(())
    }
}

/// Converged m-functions and Green's functions at one point `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MField {
    pub z: C64,
    /// Indexed by [`DirectedEdge::index`].
    pub m: Vec<C64>,
    /// Diagonal Green's function per quotient vertex.
    pub g: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
}

impl MField {
    pub fn m(&self, e: DirectedEdge) -> C64 {
        self.m[e.index()]
    }

    pub fn green(&self, vertex: usize) -> C64 {
        self.g[vertex]
    }

    /// `(1/p) sum_j G_j`, the Stieltjes transform of the density of states.
    pub fn average_green(&self) -> C64 {
        self.g.iter().sum::<C64>() / self.g.len() as f64
    }

    /// `(1/pi) Im G_j` per vertex.
    pub fn densities(&self) -> Vec<f64> {
        self.g.iter().map(|g| g.im / PI).collect()
    }

    pub fn average_density(&self) -> f64 {
        self.average_green().im / PI
    }

    /// Every `m` and `G` has imaginary part above `-slack`.
    pub fn is_herglotz(&self, slack: f64) -> bool {
        self.m.iter().chain(self.g.iter()).all(|w| w.im > -slack)
    }
}

/// Precomputed index structure of the coupled system.
struct System<'g> {
    graph: &'g QuotientGraph,
    /// `a^2` per directed edge.
    w2: Vec<f64>,
    head: Vec<usize>,
}

impl<'g> System<'g> {
    fn new(graph: &'g QuotientGraph) -> Self {
        let w2 = graph.directed_edges().map(|e| graph.weight(e).powi(2)).collect();
        let head = graph.directed_edges().map(|e| graph.head(e)).collect();
        System { graph, w2, head }
    }

    fn n(&self) -> usize {
        self.w2.len()
    }

    /// `sum_{f leaving j} a_f^2 m_f` per vertex.
    fn vertex_sums(&self, m: &[C64]) -> Vec<C64> {
        let mut s = vec![C64::new(0.0, 0.0); self.graph.p()];
        for j in 0..self.graph.p() {
            for f in self.graph.outgoing(j) {
                s[j] += self.w2[f.index()] * m[f.index()];
            }
        }
        s
    }

    /// Denominators `D_e` of the m-equations.
    // Summed directly over the outgoing set minus the reverse edge: near a
    // pole the reverse term can dwarf the rest, and subtracting it from the
    // full vertex sum loses every significant digit.
    fn denominators(&self, z: C64, m: &[C64]) -> Vec<C64> {
        (0..self.n())
            .map(|e| {
                let j = self.head[e];
                let back = e ^ 1;
                let mut s = C64::new(0.0, 0.0);
                for f in self.graph.outgoing(j) {
                    let f = f.index();
                    if f != back {
                        s += self.w2[f] * m[f];
                    }
                }
                -z + self.graph.b(j) - s
            })
            .collect()
    }

    fn residual_with(&self, m: &[C64], d: &[C64]) -> f64 {
        m.iter().zip(d).map(|(m, d)| (m * d - 1.0).norm()).fold(0.0, f64::max)
    }

    /// Rounding floor of the residual: what evaluating `m_e D_e` in floating
    /// point can resolve when `D_e` is a cancellation of larger terms.
    fn rounding_floor(&self, z: C64, m: &[C64]) -> f64 {
        let worst = (0..self.n())
            .map(|e| {
                let j = self.head[e];
                let mut s = z.norm() + self.graph.b(j).abs();
                for f in self.graph.outgoing(j) {
                    let f = f.index();
                    if f != e ^ 1 {
                        s += self.w2[f] * m[f].norm();
                    }
                }
                m[e].norm() * s
            })
            .fold(0.0, f64::max);
        64.0 * f64::EPSILON * worst
    }

    fn accepts(&self, z: C64, m: &[C64], res: f64, tol: f64) -> bool {
        res <= tol || res <= self.rounding_floor(z, m)
    }

    fn residual(&self, z: C64, m: &[C64]) -> f64 {
        let d = self.denominators(z, m);
        self.residual_with(m, &d)
    }

    fn greens(&self, z: C64, m: &[C64]) -> Vec<C64> {
        let s = self.vertex_sums(m);
        (0..self.graph.p()).map(|j| 1.0 / (-z + self.graph.b(j) - s[j])).collect()
    }

    /// Newton iteration on `F_e(m) = m_e D_e(m) - 1` with backtracking.
    /// Returns the iterate, its residual and the number of steps taken.
    fn newton(&self, z: C64, start: &[C64], opts: &SolverOptions) -> Option<(Vec<C64>, f64, usize)> {
        let (max_iter, tol) = (opts.newton_max_iter, opts.tol);
        let n = self.n();
        let mut m = start.to_vec();
        let mut d = self.denominators(z, &m);
        let mut res = self.residual_with(&m, &d);
        for it in 0..max_iter {
            if self.accepts(z, &m, res, tol) {
                return Some((m, res, it));
            }
            let mut jac = vec![C64::new(0.0, 0.0); n * n];
            let mut rhs: Vec<C64> = (0..n).map(|e| -(m[e] * d[e] - 1.0)).collect();
            for e in 0..n {
                let row = &mut jac[e * n..(e + 1) * n];
                // columns scaled by m_f: the unknowns are relative updates,
                // which keeps the matrix balanced when |m| spans many decades
                row[e] += d[e] * m[e];
                let j = self.head[e];
                for f in self.graph.outgoing(j) {
                    let f = f.index();
                    if f != (e ^ 1) {
                        row[f] -= m[e] * self.w2[f] * m[f];
                    }
                }
            }
            if !lu_solve(&mut jac, &mut rhs, n) {
                return (res <= opts.stall_tol).then_some((m, res, it));
            }
            for (dm, m) in rhs.iter_mut().zip(&m) {
                *dm *= m;
            }
            let mut step = 1.0;
            loop {
                let trial: Vec<C64> = m.iter().zip(&rhs).map(|(m, dm)| m + step * dm).collect();
                let trial_d = self.denominators(z, &trial);
                let trial_res = self.residual_with(&trial, &trial_d);
                if trial_res.is_finite() && (trial_res < res || self.accepts(z, &trial, trial_res, tol)) {
                    m = trial;
                    d = trial_d;
                    res = trial_res;
                    break;
                }
                step *= 0.5;
                if step < 1e-4 {
                    return (res <= opts.stall_tol).then_some((m, res, it));
                }
            }
        }
        (self.accepts(z, &m, res, tol) || res <= opts.stall_tol).then_some((m, res, max_iter))
    }

    fn field(&self, z: C64, m: Vec<C64>, residual: f64, iterations: usize) -> MField {
        let g = self.greens(z, &m);
        MField { z, m, g, residual, iterations }
    }
}

/// Dense LU solve; solution overwrites `b`.
fn lu_solve(a: &mut [C64], b: &mut [C64], n: usize) -> bool {
    let mat = DMatrix::from_row_slice(n, n, a);
    let rhs = DVector::from_column_slice(b);
    match mat.lu().solve(&rhs) {
        Some(x) if x.iter().all(|w| w.re.is_finite() && w.im.is_finite()) => {
            b.copy_from_slice(x.as_slice());
            true
        }
        _ => false,
    }
}

/// Herglotz slack tolerated on a converged field.
fn cone_slack(m: &[C64]) -> f64 {
    1e-12 * m.iter().map(|w| w.norm()).fold(1.0, f64::max)
}

fn in_cone(field: &MField) -> bool {
    field.is_herglotz(cone_slack(&field.m))
}

/// One undamped fixed-point sweep `m -> 1 / D(m)`.
pub fn sweep(g: &QuotientGraph, z: C64, m: &[C64]) -> Vec<C64> {
    let sys = System::new(g);
    sys.denominators(z, m).into_iter().map(|d| 1.0 / d).collect()
}

/// `max_e |m_e D_e(m) - 1|` for an arbitrary candidate field.
pub fn residual(g: &QuotientGraph, z: C64, m: &[C64]) -> f64 {
    System::new(g).residual(z, m)
}

/// Solves the m-system at `z` from a cold start `m = 0`: damped fixed-point
/// sweeps, switching to Newton once the residual plateaus.
pub fn solve_m(g: &QuotientGraph, z: HalfPlanePoint, opts: &SolverOptions) -> Result<MField, SolveError> {
    opts.check()?;
    let z = z.z();
    let sys = System::new(g);
    let theta = opts.damping;
    let mut m = vec![C64::new(0.0, 0.0); sys.n()];
    let mut history: VecDeque<f64> = VecDeque::with_capacity(opts.plateau_window + 1);
    let mut res = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let d = sys.denominators(z, &m);
        res = sys.residual_with(&m, &d);
        if sys.accepts(z, &m, res, opts.tol) {
            return Ok(sys.field(z, m, res, iterations));
        }
        history.push_back(res);
        if history.len() > opts.plateau_window {
            let old = history.pop_front().expect("nonempty");
            if res > opts.plateau_ratio * old {
                if let Some((mn, r, steps)) = sys.newton(z, &m, opts) {
                    let field = sys.field(z, mn, r, iterations + steps);
                    if in_cone(&field) {
                        return Ok(field);
                    }
                }
                history.clear();
            }
        }
        for (m, d) in m.iter_mut().zip(&d) {
            *m = (1.0 - theta) * *m + theta / d;
        }
        debug_assert!(m.iter().all(|w| w.im > 0.0), "damped sweep left the Herglotz cone");
        iterations += 1;
    }
    Err(SolveError::NoConvergence { z, iterations, residual: res })
}

/// Refines a known nearby solution at a new point with Newton only.
pub fn refine(g: &QuotientGraph, z: HalfPlanePoint, start: &MField, opts: &SolverOptions) -> Result<MField, SolveError> {
    let sys = System::new(g);
    let z = z.z();
    match sys.newton(z, &start.m, opts) {
        Some((m, r, steps)) => {
            let field = sys.field(z, m, r, start.iterations + steps);
            if in_cone(&field) {
                Ok(field)
            } else {
                Err(SolveError::NoConvergence { z, iterations: steps, residual: r })
            }
        }
        None => Err(SolveError::NoConvergence { z, iterations: opts.newton_max_iter, residual: f64::NAN }),
    }
}

/// Solves at `x + i h` for every height in `heights` (strictly positive,
/// decreasing), following the solution down from `x + i (R + 1)`.
///
/// The ladder is geometric; the ratio widens after easy rungs and narrows
/// (down to near 1) after failed ones.
pub fn continuation_ladder(
    g: &QuotientGraph,
    x: f64,
    heights: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<MField>, SolveError> {
    opts.check()?;
    if let Some(&bad) = heights.iter().find(|&&h| !(h > 0.0)) {
        return Err(SolveError::NotInUpperHalfPlane { z: C64::new(x, bad) });
    }
    if heights.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SolveError::InvalidOption("heights must be strictly decreasing".into()));
    }
    let sys = System::new(g);
    let top = (g.schur_norm_bound() + 1.0).max(heights.first().copied().unwrap_or(1.0));
    let mut field = solve_m(g, HalfPlanePoint::from_parts(x, top)?, opts)?;
    let mut h = top;
    let mut ratio = opts.ladder_ratio;
    let mut out = Vec::with_capacity(heights.len());
    for &target in heights {
        while h > target {
            let next = (h * ratio).max(target);
            let z = C64::new(x, next);
            let attempt = sys
                .newton(z, &field.m, opts)
                .map(|(m, r, steps)| (sys.field(z, m, r, field.iterations + steps), steps))
                .filter(|(f, _)| in_cone(f));
            match attempt {
                Some((f, steps)) => {
                    field = f;
                    h = next;
                    if steps <= 3 {
                        ratio = (ratio * ratio).max(opts.ladder_min_ratio);
                    }
                }
                None => {
                    ratio = ratio.sqrt();
                    if ratio > 0.9999 {
                        return Err(SolveError::NoConvergence {
                            z,
                            iterations: field.iterations,
                            residual: sys.residual(z, &field.m),
                        });
                    }
                }
            }
        }
        out.push(field.clone());
    }
    Ok(out)
}

/// Solves at `x + i eps` by continuation from high in the upper half-plane.
pub fn continuation_solve(g: &QuotientGraph, x: f64, eps: f64, opts: &SolverOptions) -> Result<MField, SolveError> {
    Ok(continuation_ladder(g, x, &[eps], opts)?.pop().expect("one rung requested"))
}

/// Largest defect of `G_j = 1 / (1/m_e - a_e^2 m_{reverse(e)})` over directed
/// edges `e` ending at `j`.
pub fn greens_consistency(g: &QuotientGraph, field: &MField) -> f64 {
    g.directed_edges()
        .map(|e| {
            let j = g.head(e);
            let w2 = g.weight(e).powi(2);
            let alt = 1.0 / (1.0 / field.m(e) - w2 * field.m(e.reverse()));
            (field.green(j) - alt).norm()
        })
        .fold(0.0, f64::max)
}

/// Off-diagonal Green's function from a lift of `base` to the endpoint of a
/// non-backtracking path: `G_base * prod(-a_e m_e)`.
pub fn greens_path(g: &QuotientGraph, field: &MField, base: usize, path: &[DirectedEdge]) -> Result<C64, SolveError> {
    let mut value = field.green(base);
    let mut at = base;
    let mut prev: Option<DirectedEdge> = None;
    for (step, &e) in path.iter().enumerate() {
        if g.tail(e) != at {
            return Err(SolveError::BrokenPath { step });
        }
        if prev == Some(e.reverse()) {
            return Err(SolveError::BacktrackingPath { step });
        }
        value *= -g.weight(e) * field.m(e);
        at = g.head(e);
        prev = Some(e);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn at(z: C64) -> HalfPlanePoint {
        HalfPlanePoint::new(z).unwrap()
    }

    #[test]
    fn rejects_real_axis() {
        assert!(HalfPlanePoint::new(c(1.0, 0.0)).is_err());
        assert!(HalfPlanePoint::new(c(1.0, -1e-3)).is_err());
        let opts = SolverOptions::default();
        assert!(continuation_solve(&fixtures::line(), 0.0, 0.0, &opts).is_err());
    }

    #[test]
    fn four_regular_at_2i() {
        let f = solve_m(&fixtures::regular(4), at(c(0.0, 2.0)), &SolverOptions::default()).unwrap();
        for m in &f.m {
            assert!((m - c(0.0, 1.0 / 3.0)).norm() < 1e-12, "{m}");
        }
        for g in &f.g {
            assert!((g - c(0.0, 0.3)).norm() < 1e-12, "{g}");
        }
        assert!(greens_consistency(&fixtures::regular(4), &f) < 1e-12);
    }

    #[test]
    fn free_line_at_2i() {
        let f = solve_m(&fixtures::line(), at(c(0.0, 2.0)), &SolverOptions::default()).unwrap();
        let expected = c(0.0, 2f64.sqrt() - 1.0);
        for m in &f.m {
            assert!((m - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn field_respects_bounds_and_tolerance() {
        let opts = SolverOptions::default();
        for (_, g) in fixtures::catalog() {
            for z in [c(0.3, 0.7), c(-1.2, 0.2), c(2.0, 3.0)] {
                let f = solve_m(&g, at(z), &opts).unwrap();
                assert!(f.residual <= opts.tol);
                assert!(f.is_herglotz(0.0));
                for w in f.m.iter().chain(&f.g) {
                    assert!(w.norm() <= 1.0 / z.im + 1e-12);
                }
            }
        }
    }

    #[test]
    fn continuation_agrees_with_cold_solve() {
        let opts = SolverOptions::default();
        let g = fixtures::rg(3, 2);
        let cold = solve_m(&g, at(c(0.4, 0.05)), &opts).unwrap();
        let warm = continuation_solve(&g, 0.4, 0.05, &opts).unwrap();
        for (a, b) in cold.g.iter().zip(&warm.g) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn three_regular_center_density() {
        let f = continuation_solve(&fixtures::regular(3), 0.0, 1e-6, &SolverOptions::default()).unwrap();
        let expected = 2f64.sqrt() / (3.0 * PI);
        for d in f.densities() {
            assert!((d - expected).abs() < 1e-4);
        }
    }

    #[test]
    fn period_two_gap_center_is_real() {
        let f = continuation_solve(&fixtures::period_two(3, 1.0), 0.0, 1e-8, &SolverOptions::default()).unwrap();
        for g in &f.g {
            assert!(g.im.abs() < 1e-4);
        }
    }

    #[test]
    fn far_outside_spectrum_is_real_with_sign() {
        let opts = SolverOptions::default();
        for (_, g) in fixtures::catalog() {
            let r = g.schur_norm_bound();
            for x in [r + 2.0, -r - 2.0] {
                let f = continuation_solve(&g, x, 1e-13, &opts).unwrap();
                for gj in &f.g {
                    assert!(gj.im.abs() < 1e-12);
                    assert_eq!(gj.re.signum(), -x.signum());
                }
            }
        }
    }

    #[test]
    fn greens_path_rules() {
        let g = fixtures::fts(&[1.5, 1.0, 1.0]);
        let f = solve_m(&g, at(c(0.1, 0.5)), &SolverOptions::default()).unwrap();
        assert_eq!(greens_path(&g, &f, 0, &[]).unwrap(), f.green(0));
        let e0 = DirectedEdge::new(0, false);
        let e1 = DirectedEdge::new(1, false);
        assert_eq!(
            greens_path(&g, &f, 0, &[e0, e0.reverse()]),
            Err(SolveError::BacktrackingPath { step: 1 })
        );
        assert_eq!(greens_path(&g, &f, 0, &[e0, e1]), Err(SolveError::BrokenPath { step: 1 }));
        let v = greens_path(&g, &f, 0, &[e0, e1.reverse()]).unwrap();
        let expected = f.green(0) * (-1.5 * f.m(e0)) * (-1.0 * f.m(e1.reverse()));
        assert!((v - expected).norm() < 1e-15);
    }

    #[test]
    fn fts_single_edge_kernel_limit() {
        let g = fixtures::fts(&[1.5, 1.0, 1.0]);
        let f = continuation_solve(&g, 0.0, 1e-9, &SolverOptions::default()).unwrap();
        let e0 = DirectedEdge::new(0, false);
        let one = greens_path(&g, &f, 0, &[e0]).unwrap();
        assert!((one - c(2.0 / 3.0, 0.0)).norm() < 1e-6, "{one}");
        let e1 = DirectedEdge::new(1, true);
        let two = greens_path(&g, &f, 0, &[e0, e1]).unwrap();
        assert!(two.norm() < 1e-6, "{two}");
    }
}
