//! Closed-form reference models.
//!
//! Square roots of the discriminants are never taken on the principal
//! branch. Each is continued along the segment from a point high on the
//! imaginary axis down to `z`, starting from the root that matches the
//! leading behaviour at infinity.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::fixtures;
use crate::graph::QuotientGraph;
use crate::quadrature;

type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("gap at 0 is closed: a1^2 = {lead} <= {rest}")]
    GapClosed { lead: f64, rest: f64 },
    #[error("continued fraction not converged at depth {depth}")]
    NoConvergence { depth: usize },
    #[error("not a reduced word: letter {position} repeats its predecessor")]
    NotReduced { position: usize },
    #[error("generator {letter} out of range (d = {d})")]
    BadLetter { letter: usize, d: usize },
}

/// Continues `sqrt(f)` from `i * height` to `z`. At the start the root
/// nearest `asymptote(i * height)` is taken; afterwards each step picks the
/// root nearest the previous value, halving the step when that root moves
/// by more than a quarter of its size.
fn tracked_sqrt<F, A>(f: F, asymptote: A, z: C64, scale: f64) -> C64
where
    F: Fn(C64) -> C64,
    A: Fn(C64) -> C64,
{
    let height = 4.0 * (z.norm() + scale + 1.0);
    let start = C64::new(0.0, height);
    let mut w = f(start).sqrt();
    if (w - asymptote(start)).norm() > (-w - asymptote(start)).norm() {
        w = -w;
    }
    let mut t = 0.0f64;
    let mut dt = 1.0 / 64.0;
    while t < 1.0 {
        let next = (t + dt).min(1.0);
        let at = start + (z - start) * next;
        let mut cand = f(at).sqrt();
        if (cand - w).norm() > (-cand - w).norm() {
            cand = -cand;
        }
        let moved = (cand - w).norm();
        if moved <= 0.25 * w.norm().max(1e-300) || dt < 1e-14 {
            w = cand;
            t = next;
            dt *= 1.5;
        } else {
            dt *= 0.5;
        }
    }
    w
}

// ---------------------------------------------------------------------------
// regular tree

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegularModel {
    pub d: usize,
}

impl RegularModel {
    pub fn new(d: usize) -> Result<Self, OracleError> {
        if d < 2 {
            return Err(OracleError::InvalidModel(format!("degree {d} < 2")));
        }
        Ok(RegularModel { d })
    }

    /// Spectral edge `2 sqrt(d - 1)`.
    pub fn edge(&self) -> f64 {
        2.0 * ((self.d - 1) as f64).sqrt()
    }

    pub fn graph(&self) -> QuotientGraph {
        fixtures::regular(self.d)
    }

    fn root(&self, z: C64) -> C64 {
        let s2 = 4.0 * (self.d - 1) as f64;
        tracked_sqrt(|w| w * w - s2, |w| w, z, self.edge())
    }
}

pub fn regular_m(model: RegularModel, z: C64) -> C64 {
    let d1 = (model.d - 1) as f64;
    (-z + model.root(z)) / (2.0 * d1)
}

pub fn regular_g(model: RegularModel, z: C64) -> C64 {
    let d = model.d as f64;
    ((2.0 - d) * z + d * model.root(z)) / (2.0 * (d * d - z * z))
}

/// Density of states of the free `d`-regular tree.
pub fn kesten_mckay(d: usize, lambda: f64) -> f64 {
    let d = d as f64;
    let s2 = 4.0 * (d - 1.0);
    if lambda * lambda >= s2 {
        return 0.0;
    }
    d * (s2 - lambda * lambda).sqrt() / (2.0 * PI * (d * d - lambda * lambda))
}

/// Cumulative distribution of [`kesten_mckay`], by quadrature in the angle
/// variable `lambda = -s cos(theta)`.
pub fn kesten_mckay_cdf(d: usize, lambda: f64) -> f64 {
    let s = 2.0 * ((d - 1) as f64).sqrt();
    if lambda <= -s {
        return 0.0;
    }
    if lambda >= s {
        return 1.0;
    }
    let top = (-lambda / s).acos();
    quadrature::integrate(|t| kesten_mckay(d, -s * t.cos()) * s * t.sin(), 0.0, top, 1e-13, 200).value
}

// ---------------------------------------------------------------------------
// red/green model

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RgModel {
    pub r: usize,
    pub g: usize,
}

impl RgModel {
    pub fn new(r: usize, g: usize) -> Result<Self, OracleError> {
        if r < 2 || g < 2 {
            return Err(OracleError::InvalidModel(format!("rg({r}, {g}) needs r, g >= 2")));
        }
        Ok(RgModel { r, g })
    }

    pub fn graph(&self) -> QuotientGraph {
        fixtures::rg(self.r, self.g)
    }

    /// Roots `(sqrt(s) - sqrt(t))^2` and `(sqrt(s) + sqrt(t))^2` of the
    /// discriminant in `z^2`, with `s = r - 1`, `t = g - 1`.
    pub fn gammas(&self) -> (f64, f64) {
        let s = (self.r - 1) as f64;
        let t = (self.g - 1) as f64;
        ((s.sqrt() - t.sqrt()).powi(2), (s.sqrt() + t.sqrt()).powi(2))
    }

    /// Band `[sqrt(gamma_-), sqrt(gamma_+)]`; the other is its mirror image.
    pub fn positive_band(&self) -> (f64, f64) {
        let (lo, hi) = self.gammas();
        (lo.sqrt(), hi.sqrt())
    }

    pub fn phi(&self, z: C64) -> C64 {
        let (r, g) = (self.r as f64, self.g as f64);
        let z2 = z * z;
        z2 * z2 + 2.0 * (2.0 - (r + g)) * z2 + (r - g) * (r - g)
    }

    /// Branch of `sqrt(phi)` behaving like `+z^2` at infinity.
    pub fn sqrt_phi(&self, z: C64) -> C64 {
        tracked_sqrt(|w| self.phi(w), |w| w * w, z, self.positive_band().1)
    }
}

/// `(m_red, m_green)`.
pub fn rg_m(model: RgModel, z: C64) -> (C64, C64) {
    let (r, g) = (model.r as f64, model.g as f64);
    let root = model.sqrt_phi(z);
    let z2 = z * z;
    let mr = ((g - r) - z2 + root) / (2.0 * (r - 1.0) * z);
    let mg = ((r - g) - z2 + root) / (2.0 * (g - 1.0) * z);
    (mr, mg)
}

/// `(G_red, G_green)`.
pub fn rg_g(model: RgModel, z: C64) -> (C64, C64) {
    let (r, g) = (model.r as f64, model.g as f64);
    let root = model.sqrt_phi(z);
    let z2 = z * z;
    let den = 2.0 * r * g * z - 2.0 * z * z2;
    let gr = ((2.0 - g) * z2 - g * ((r - g) - root)) / den;
    let gg = ((2.0 - r) * z2 - r * ((g - r) - root)) / den;
    (gr, gg)
}

/// Absolutely continuous density of states; the atom at 0 is separate.
pub fn rg_density(model: RgModel, lambda: f64) -> f64 {
    let (r, g) = (model.r as f64, model.g as f64);
    let (lo, hi) = model.positive_band();
    let x = lambda.abs();
    if x <= lo || x >= hi {
        return 0.0;
    }
    let minus_phi = -model.phi(C64::new(lambda, 0.0)).re;
    r * g * minus_phi.max(0.0).sqrt() / (PI * x * (r + g) * (r * g - lambda * lambda))
}

/// Weight of the atom at 0, `|r - g| / (r + g)`.
pub fn rg_atom(model: RgModel) -> f64 {
    let (r, g) = (model.r as f64, model.g as f64);
    ((r - g) / (r + g)).abs()
}

/// Half-line m-function of the radial Jacobi matrix with zero diagonal and
/// off-diagonals `sqrt(g), sqrt(r-1), sqrt(g-1), sqrt(r-1), ...`, truncated
/// after `depth` off-diagonal entries.
pub fn radial_halfline_m_truncated(r: usize, g: usize, z: C64, depth: usize) -> C64 {
    let coupling = |n: usize| -> f64 {
        match n {
            1 => g as f64,
            n if n % 2 == 0 => (r - 1) as f64,
            _ => (g - 1) as f64,
        }
    };
    let mut tail = C64::new(0.0, 0.0);
    for n in (1..=depth).rev() {
        tail = coupling(n) / (-z - tail);
    }
    1.0 / (-z - tail)
}

/// [`radial_halfline_m_truncated`] with the depth doubled until two
/// successive values agree to `1e-14` relative.
pub fn radial_halfline_m(r: usize, g: usize, z: C64) -> Result<C64, OracleError> {
    const MAX_DEPTH: usize = 1 << 24;
    let mut depth = 16;
    let mut prev = radial_halfline_m_truncated(r, g, z, depth);
    while depth < MAX_DEPTH {
        depth *= 2;
        let next = radial_halfline_m_truncated(r, g, z, depth);
        if (next - prev).norm() <= 1e-14 * next.norm() {
            return Ok(next);
        }
        prev = next;
    }
    Err(OracleError::NoConvergence { depth })
}

// ---------------------------------------------------------------------------
// period-two model

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodTwoModel {
    pub d: usize,
    pub b: f64,
}

impl PeriodTwoModel {
    pub fn new(d: usize, b: f64) -> Result<Self, OracleError> {
        if d < 2 || !(b > 0.0) || !b.is_finite() {
            return Err(OracleError::InvalidModel(format!("period-two model needs d >= 2, b > 0 (d = {d}, b = {b})")));
        }
        Ok(PeriodTwoModel { d, b })
    }

    /// Outer band edge `sqrt(b^2 + 4(d - 1))`.
    pub fn c(&self) -> f64 {
        (self.b * self.b + 4.0 * (self.d - 1) as f64).sqrt()
    }

    pub fn graph(&self) -> QuotientGraph {
        fixtures::period_two(self.d, self.b)
    }

    pub fn delta(&self, z: C64) -> C64 {
        let u = z * z - self.b * self.b;
        u * u - 4.0 * (self.d - 1) as f64 * u
    }

    fn sqrt_delta(&self, z: C64) -> C64 {
        tracked_sqrt(|w| self.delta(w), |w| w * w, z, self.c())
    }
}

/// `(m_+, m_-)`, the m-functions rooted at the `+b` and `-b` vertices.
pub fn p2_m(model: PeriodTwoModel, z: C64) -> (C64, C64) {
    let b = model.b;
    let num = z * z - b * b - model.sqrt_delta(z);
    let d1 = 2.0 * (model.d - 1) as f64;
    (num / (d1 * (-z + b)), num / (d1 * (-z - b)))
}

/// `(G_+, G_-)`.
pub fn p2_g(model: PeriodTwoModel, z: C64) -> (C64, C64) {
    let (b, d) = (model.b, model.d as f64);
    let num = (d - 2.0) * (b * b - z * z) + d * model.sqrt_delta(z);
    let common = 2.0 * (d * d - z * z + b * b);
    (num / (common * (z - b)), num / (common * (z + b)))
}

pub fn p2_density(model: PeriodTwoModel, lambda: f64) -> f64 {
    let (b, c, d) = (model.b, model.c(), model.d as f64);
    let x = lambda.abs();
    if x <= b || x >= c {
        return 0.0;
    }
    let l2 = lambda * lambda;
    x * d * ((l2 - b * b) * (c * c - l2)).sqrt() / (2.0 * PI * (c * c + (d - 2.0).powi(2) - l2) * (l2 - b * b))
}

// ---------------------------------------------------------------------------
// two-vertex model with d distinct weights

#[derive(Debug, Clone, PartialEq)]
pub struct FtsModel {
    weights: Vec<f64>,
}

impl FtsModel {
    /// Weights in any order; stored in decreasing order, so generator 0 is
    /// the heaviest edge.
    pub fn new(weights: &[f64]) -> Result<Self, OracleError> {
        if weights.len() < 2 || weights.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(OracleError::InvalidModel(format!("need >= 2 positive weights, got {weights:?}")));
        }
        let mut weights = weights.to_vec();
        weights.sort_by(|x, y| y.total_cmp(x));
        Ok(FtsModel { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn d(&self) -> usize {
        self.weights.len()
    }

    pub fn graph(&self) -> QuotientGraph {
        fixtures::fts(&self.weights)
    }

    fn lead_and_rest(&self) -> (f64, f64) {
        let lead = self.weights[0].powi(2);
        let rest = self.weights[1..].iter().map(|a| a * a).sum();
        (lead, rest)
    }
}

/// 0 lies outside the spectrum exactly when the heaviest weight dominates.
pub fn fts_gap_open(model: &FtsModel) -> bool {
    let (lead, rest) = model.lead_and_rest();
    lead > rest
}

/// Green's function at `z = 0` between the identity and the group element
/// `word` (generator indices into [`FtsModel::weights`]).
pub fn fts_kernel(model: &FtsModel, word: &[usize]) -> Result<f64, OracleError> {
    let (lead, rest) = model.lead_and_rest();
    if lead <= rest {
        return Err(OracleError::GapClosed { lead, rest });
    }
    for (i, &x) in word.iter().enumerate() {
        if x >= model.d() {
            return Err(OracleError::BadLetter { letter: x, d: model.d() });
        }
        if i > 0 && word[i - 1] == x {
            return Err(OracleError::NotReduced { position: i });
        }
    }
    let a1 = model.weights[0];
    if word.len() % 2 == 0 || word.iter().step_by(2).any(|&x| x != 0) {
        return Ok(0.0);
    }
    Ok(word.iter().skip(1).step_by(2).fold(1.0 / a1, |acc, &k| acc * (-model.weights[k] / a1)))
}

/// Squared `l^2` norm of [`fts_kernel`] over the whole group.
pub fn fts_row_norm_sq(model: &FtsModel) -> Result<f64, OracleError> {
    let (lead, rest) = model.lead_and_rest();
    if lead <= rest {
        return Err(OracleError::GapClosed { lead, rest });
    }
    Ok((1.0 / lead) / (1.0 - rest / lead))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn regular_at_2i() {
        let m = RegularModel::new(4).unwrap();
        assert!((regular_m(m, c(0.0, 2.0)) - c(0.0, 1.0 / 3.0)).norm() < 1e-14);
        assert!((regular_g(m, c(0.0, 2.0)) - c(0.0, 0.3)).norm() < 1e-14);
    }

    #[test]
    fn arcsine_degeneration() {
        assert!((kesten_mckay(2, 0.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn kesten_mckay_normalised() {
        let s = 2.0 * 2f64.sqrt();
        let total = quadrature::integrate(|x| kesten_mckay(3, x), -s, s, 1e-12, 2000).value;
        assert!((total - 1.0).abs() < 1e-8);
        assert!((kesten_mckay_cdf(3, 0.0) - 0.5).abs() < 1e-12);
        assert!((kesten_mckay_cdf(3, s) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rg_branch_at_zero() {
        let m = RgModel::new(3, 2).unwrap();
        assert!((m.sqrt_phi(c(0.0, 0.0)) - c(-1.0, 0.0)).norm() < 1e-12);
        let m = RgModel::new(5, 2).unwrap();
        assert!((m.sqrt_phi(c(0.0, 0.0)) - c(-3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rg_equal_colours_is_kesten_mckay() {
        for d in [3, 4] {
            let m = RgModel::new(d, d).unwrap();
            for i in 0..200 {
                let x = -4.0 + 8.0 * (i as f64 + 0.5) / 200.0;
                assert!((rg_density(m, x) - kesten_mckay(d, x)).abs() < 1e-10, "d={d} x={x}");
            }
        }
    }

    #[test]
    fn rg_masses() {
        let m = RgModel::new(3, 2).unwrap();
        assert!((rg_atom(m) - 0.2).abs() < 1e-15);
        let (lo, hi) = m.positive_band();
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let band = quadrature::integrate(|t| rg_density(m, mid - half * t.cos()) * half * t.sin(), 0.0, PI, 1e-12, 500);
        assert!((band.value - 0.4).abs() < 1e-9, "{}", band.value);
    }

    #[test]
    fn rg_no_pole_at_sqrt_rg() {
        let m = RgModel::new(3, 2).unwrap();
        let x = 6f64.sqrt();
        let (near_r, near_g) = rg_g(m, c(x, 1e-7));
        let (far_r, far_g) = rg_g(m, c(x, 1e-4));
        assert!(near_r.norm() < 10.0 && near_g.norm() < 10.0);
        assert!((near_r - far_r).norm() < 1e-2 && (near_g - far_g).norm() < 1e-2);
    }

    #[test]
    fn rg_resolvent_consistency() {
        let m = RgModel::new(3, 2).unwrap();
        let z = c(0.7, 0.4);
        let (mr, mg) = rg_m(m, z);
        let (gr, gg) = rg_g(m, z);
        assert!((gr - 1.0 / (-z - 2.0 * mg)).norm() < 1e-12);
        assert!((gg - 1.0 / (-z - 3.0 * mr)).norm() < 1e-12);
        assert!((mr - 1.0 / (-z - mg)).norm() < 1e-12);
    }

    #[test]
    fn radial_fraction_matches_red_green() {
        let z = c(1.0, 1.0);
        let m = RgModel::new(3, 2).unwrap();
        let cf = radial_halfline_m(3, 2, z).unwrap();
        assert!((cf - rg_g(m, z).0).norm() < 1e-8);
        let cf = radial_halfline_m(4, 4, z).unwrap();
        assert!((cf - regular_g(RegularModel::new(4).unwrap(), z)).norm() < 1e-10);
    }

    #[test]
    fn period_two_values() {
        let m = PeriodTwoModel::new(3, 1.0).unwrap();
        assert!((m.c() - 3.0).abs() < 1e-15);
        assert!((p2_density(m, 2.0) - 15f64.sqrt() / (6.0 * PI)).abs() < 1e-14);
        let z = c(0.3, 0.8);
        let (mp, mm) = p2_m(m, z);
        let (gp, gm) = p2_g(m, z);
        assert!((mp - 1.0 / (-z + 1.0 - 2.0 * mm)).norm() < 1e-12);
        assert!((gp - 1.0 / (-z + 1.0 - 3.0 * mm)).norm() < 1e-12);
        assert!((gm - 1.0 / (-z - 1.0 - 3.0 * mp)).norm() < 1e-12);
    }

    #[test]
    fn period_two_small_b_and_line() {
        let tiny = PeriodTwoModel::new(3, 1e-9).unwrap();
        for x in [-2.5, -1.0, 0.3, 2.0] {
            assert!((p2_density(tiny, x) - kesten_mckay(3, x)).abs() < 1e-6);
        }
        let line = PeriodTwoModel::new(2, 0.5).unwrap();
        let (b, c) = (0.5, line.c());
        assert!((c - 4.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(p2_density(line, 0.4), 0.0);
        assert!(p2_density(line, 1.0) > 0.0);
        let mass = quadrature::integrate(|x| p2_density(line, x), b, c, 1e-12, 2000).value;
        assert!((mass - 0.5).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn fts_formulas() {
        let open = FtsModel::new(&[1.0, 1.5, 1.0]).unwrap();
        assert_eq!(open.weights(), &[1.5, 1.0, 1.0]);
        assert!(fts_gap_open(&open));
        assert!(!fts_gap_open(&FtsModel::new(&[1.4, 1.0, 1.0]).unwrap()));
        assert!(!fts_gap_open(&FtsModel::new(&[2.0; 4]).unwrap()));
        assert!((fts_kernel(&open, &[0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((fts_kernel(&open, &[0, 1, 0]).unwrap() + 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(fts_kernel(&open, &[0, 1]).unwrap(), 0.0);
        assert_eq!(fts_kernel(&open, &[1, 0, 1]).unwrap(), 0.0);
        assert_eq!(fts_kernel(&open, &[0, 0]), Err(OracleError::NotReduced { position: 1 }));
        assert!((fts_row_norm_sq(&open).unwrap() - 4.0).abs() < 1e-12);
        let closed = FtsModel::new(&[1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(fts_row_norm_sq(&closed), Err(OracleError::GapClosed { .. })));
    }

    #[test]
    fn fts_level_sums_by_enumeration() {
        let model = FtsModel::new(&[1.5, 1.0, 0.8]).unwrap();
        let ratio: f64 = (1.0 + 0.64) / 2.25;
        for m in 0..12u32 {
            let mut level = 0.0;
            for mask in 0..(1u64 << m) {
                let mut word = vec![0];
                for i in 0..m {
                    word.push(1 + ((mask >> i) & 1) as usize);
                    word.push(0);
                }
                level += fts_kernel(&model, &word).unwrap().powi(2);
            }
            let expected = ratio.powi(m as i32) / 2.25;
            assert!((level - expected).abs() < 1e-13, "M={m}: {level} vs {expected}");
        }
    }
}
