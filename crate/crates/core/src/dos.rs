//! Density of states, band/gap structure, atoms and gap labels.
//!
//! The density is read off boundary values `(1/pi) Im G(x + i eps)` at a
//! very small height. Whether `x` lies in the absolutely continuous spectrum
//! is decided by comparing two heights a decade apart: inside a band the
//! density barely moves, in a gap it scales like `eps`, and on an atom like
//! `1/eps`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::QuotientGraph;
use crate::mfield::{self, MField, SolveError, SolverOptions};
use crate::quadrature;

type C64 = num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DosError {
    #[error("solver failed at x = {x}: {source}")]
    Solve { x: f64, source: SolveError },
    #[error("residue at x = {x} does not stabilise (spread {spread:e})")]
    NonAtomic { x: f64, spread: f64 },
    #[error("band [{lower}, {upper}] is narrower than the resolution {resolution}")]
    UnresolvedStructure { lower: f64, upper: f64, resolution: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

fn at(x: f64) -> impl Fn(SolveError) -> DosError {
    move |source| DosError::Solve { x, source }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DosOptions {
    pub solver: SolverOptions,
    /// Height of the boundary values used for densities and edges.
    pub eps_fine: f64,
    /// Comparison height for the band test.
    pub eps_coarse: f64,
    pub grid_points: usize,
    /// Defaults to `2R / 4096`.
    pub resolution: Option<f64>,
    /// A band must reach this density somewhere on the grid.
    pub gap_threshold: f64,
    /// Heights used to extrapolate residues.
    pub atom_ladder: Vec<f64>,
    /// Smallest average residue reported as an atom.
    pub atom_threshold: f64,
    /// Allowed spread of the residue extrapolants.
    pub atom_stability: f64,
    pub quad_rel_tol: f64,
    pub max_moment: usize,
}

impl Default for DosOptions {
    fn default() -> Self {
        DosOptions {
            solver: SolverOptions::default(),
            eps_fine: 1e-12,
            eps_coarse: 1e-11,
            grid_points: 4097,
            resolution: None,
            gap_threshold: 1e-3,
            atom_ladder: vec![1e-6, 1e-7, 1e-8, 1e-9],
            atom_threshold: 1e-6,
            atom_stability: 1e-6,
            quad_rel_tol: 1e-11,
            max_moment: 8,
        }
    }
}

impl DosOptions {
    pub fn resolution_for(&self, g: &QuotientGraph) -> f64 {
        self.resolution.unwrap_or(2.0 * g.schur_norm_bound() / 4096.0)
    }
}

// ---------------------------------------------------------------------------
// pointwise densities

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub eps: f64,
    /// `per_vertex[j][i]` is `(1/pi) Im G_j(xs[i] + i eps)`.
    pub per_vertex: Vec<Vec<f64>>,
    pub average: Vec<f64>,
}

fn clip(d: f64) -> f64 {
    if d < 0.0 && d > -1e-9 {
        0.0
    } else {
        d
    }
}

/// Densities at `x + i eps` for every `x` in the strictly increasing `xs`.
pub fn density_grid(g: &QuotientGraph, xs: &[f64], eps: f64, opts: &SolverOptions) -> Result<DensityGrid, DosError> {
    if !(eps > 0.0) {
        return Err(DosError::InvalidOption(format!("eps must be positive, got {eps}")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DosError::InvalidOption("grid must be strictly increasing".into()));
    }
    let fields: Vec<MField> = xs
        .par_iter()
        .map(|&x| mfield::continuation_solve(g, x, eps, opts).map_err(at(x)))
        .collect::<Result<_, _>>()?;
    let mut per_vertex = vec![Vec::with_capacity(xs.len()); g.p()];
    let mut average = Vec::with_capacity(xs.len());
    for f in &fields {
        for (j, d) in f.densities().into_iter().enumerate() {
            per_vertex[j].push(clip(d));
        }
        average.push(clip(f.average_density()));
    }
    Ok(DensityGrid { xs: xs.to_vec(), eps, per_vertex, average })
}

/// Boundary data at one real point, at two heights.
#[derive(Debug, Clone)]
struct Probe {
    fine: MField,
    coarse: MField,
}

impl Probe {
    fn take(g: &QuotientGraph, x: f64, opts: &DosOptions) -> Result<Probe, DosError> {
        let mut v = mfield::continuation_ladder(g, x, &[opts.eps_coarse, opts.eps_fine], &opts.solver).map_err(at(x))?;
        let fine = v.pop().expect("two rungs");
        let coarse = v.pop().expect("two rungs");
        Ok(Probe { fine, coarse })
    }

    fn density(&self) -> f64 {
        self.fine.average_density()
    }

    fn re_green(&self) -> f64 {
        self.fine.average_green().re
    }

    fn in_band(&self) -> bool {
        let fine = self.fine.average_density();
        let coarse = self.coarse.average_density();
        fine > 1e-14 && coarse > 0.0 && (0.5..2.0).contains(&(fine / coarse))
    }
}

/// Whether `x` lies in the absolutely continuous spectrum, by the two-height
/// test.
pub fn in_band(g: &QuotientGraph, x: f64, opts: &DosOptions) -> Result<bool, DosError> {
    Ok(Probe::take(g, x, opts)?.in_band())
}

// ---------------------------------------------------------------------------
// atoms

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub location: f64,
    /// Residue of each vertex spectral measure.
    pub per_vertex: Vec<f64>,
    /// `(1/p) sum_j per_vertex[j]`.
    pub weight: f64,
}

/// `lim eps Im G_j(x + i eps)` per vertex, extrapolated from `ladder`
/// (strictly decreasing heights). At a genuine atom the lowest rung is
/// already within `O(eps)` of the limit; an edge singularity decays only
/// like `sqrt(eps)` and is rejected by that test.
pub fn point_mass(g: &QuotientGraph, x: f64, ladder: &[f64], opts: &DosOptions) -> Result<PointMass, DosError> {
    if ladder.len() < 2 {
        return Err(DosError::InvalidOption("residue ladder needs at least two heights".into()));
    }
    let fields = mfield::continuation_ladder(g, x, ladder, &opts.solver).map_err(at(x))?;
    let mut per_vertex = Vec::with_capacity(g.p());
    let mut spread: f64 = 0.0;
    for j in 0..g.p() {
        let ys: Vec<f64> = fields.iter().zip(ladder).map(|(f, e)| e * f.green(j).im).collect();
        let all = quadrature::extrapolate_to_zero(ladder, &ys);
        let tail = quadrature::extrapolate_to_zero(&ladder[1..], &ys[1..]);
        let settled = (ys[ys.len() - 1] - all).abs();
        spread = spread.max((all - tail).abs()).max(settled);
        per_vertex.push(all);
    }
    if spread > opts.atom_stability {
        return Err(DosError::NonAtomic { x, spread });
    }
    let per_vertex: Vec<f64> = per_vertex.into_iter().map(|w| if w.abs() < 1e-12 { 0.0 } else { w }).collect();
    let weight = per_vertex.iter().sum::<f64>() / g.p() as f64;
    Ok(PointMass { location: x, per_vertex, weight })
}

/// Locates the pole of `G` between `lo` and `hi` off the a.c. spectrum, where
/// `Re G(lo) > Re G(hi)`. Off the spectrum `Re G` increases except for the
/// jump at a pole, so "left of the pole" is `Re G(x) > midpoint`.
fn bisect_pole(g: &QuotientGraph, mut lo: f64, mut hi: f64, g_lo: f64, g_hi: f64, opts: &DosOptions) -> Result<f64, DosError> {
    let threshold = 0.5 * (g_lo + g_hi);
    for _ in 0..200 {
        if hi - lo <= 1e-13 * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if Probe::take(g, mid, opts)?.re_green() > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// structure

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
    pub mass: f64,
    /// `int x^k dk` over the band, `k = 0..=max_moment`.
    pub moments: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub numerator: i64,
    pub denominator: i64,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub lower: f64,
    pub upper: f64,
    pub ids_value: f64,
    pub label: Label,
    /// `|ids_value - label|`.
    pub label_defect: f64,
    /// Narrower than the resolution: may be a closed gap.
    pub unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedMass {
    pub location: f64,
    pub weight: f64,
    pub weight_times_p: i64,
    pub per_vertex: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub bands: Vec<Band>,
    pub gaps: Vec<Gap>,
    pub point_masses: Vec<ReportedMass>,
    pub total_mass: f64,
    pub period: usize,
    pub resolution: f64,
}

impl SpectralReport {
    /// `int x^k dk` from band quadrature plus atoms.
    pub fn moment(&self, k: usize) -> f64 {
        let bands: f64 = self.bands.iter().map(|b| b.moments[k]).sum();
        let atoms: f64 = self.point_masses.iter().map(|a| a.weight * a.location.powi(k as i32)).sum();
        bands + atoms
    }

    /// Integrated density of states at `x`, for `x` off the a.c. spectrum.
    pub fn ids_below(&self, x: f64) -> f64 {
        let bands: f64 = self.bands.iter().filter(|b| b.upper <= x).map(|b| b.mass).sum();
        let atoms: f64 = self.point_masses.iter().filter(|a| a.location < x).map(|a| a.weight).sum();
        bands + atoms
    }

    /// The gap containing `x`, if any.
    pub fn gap_containing(&self, x: f64) -> Option<&Gap> {
        self.gaps.iter().find(|gap| gap.lower < x && x < gap.upper)
    }

    pub fn band_containing(&self, x: f64) -> Option<&Band> {
        self.bands.iter().find(|b| b.lower <= x && x <= b.upper)
    }

    pub fn atom_at(&self, x: f64, tol: f64) -> Option<&ReportedMass> {
        self.point_masses.iter().find(|a| (a.location - x).abs() <= tol)
    }

    /// Does `x` lie in the spectrum as far as the report can tell?
    pub fn contains(&self, x: f64) -> bool {
        self.band_containing(x).is_some() || self.atom_at(x, self.resolution).is_some()
    }
}

fn nearest_label(ids: f64, p: usize) -> (Label, f64) {
    let j = (ids * p as f64).round() as i64;
    let defect = (ids - j as f64 / p as f64).abs();
    (Label { numerator: j, denominator: p as i64 }, defect)
}

const EDGE_GIVE_UP: f64 = 1e-8;

/// Finds the edge between `outside` and `inside` with the two-height test.
fn refine_edge(g: &QuotientGraph, mut outside: f64, mut inside: f64, opts: &DosOptions) -> Result<f64, DosError> {
    for _ in 0..200 {
        if (inside - outside).abs() <= 1e-13 * inside.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (inside + outside);
        match Probe::take(g, mid, opts) {
            Ok(probe) if probe.in_band() => inside = mid,
            Ok(_) => outside = mid,
            // a point this close to a singular edge can exceed the solver;
            // the bracket already pins the edge down
            Err(_) if (inside - outside).abs() <= EDGE_GIVE_UP * inside.abs().max(1.0) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Density at `x + i eps_fine`, raising the height by decades (up to 1e-8)
/// where the solver cannot resolve a point next to a singular band edge.
/// Such points carry vanishing quadrature weight.
fn density_near_edge(g: &QuotientGraph, x: f64, opts: &DosOptions) -> Result<f64, DosError> {
    let mut eps = opts.eps_fine;
    loop {
        match mfield::continuation_solve(g, x, eps, &opts.solver) {
            Ok(f) => return Ok(f.average_density().max(0.0)),
            Err(_) if eps < 1e-8 => eps *= 10.0,
            Err(e) => return Err(DosError::Solve { x, source: e }),
        }
    }
}

/// `int_lower^upper x^k (density) dx` for `k = 0..=kmax`, by quadrature of
/// boundary values in the angle variable `x = mid - half cos(theta)`.
/// Accurate when the density vanishes like a square root at both ends; an
/// integrable blow-up at an edge makes the result sensitive to where the
/// edge was placed.
pub fn moments_by_density(g: &QuotientGraph, lower: f64, upper: f64, kmax: usize, opts: &DosOptions) -> Result<Vec<f64>, DosError> {
    let mid = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    let r = quadrature::integrate_vec(
        |theta| {
            let x = mid - half * theta.cos();
            let w = density_near_edge(g, x, opts)? * half * theta.sin();
            Ok::<_, DosError>((0..=kmax).map(|k| w * x.powi(k as i32)).collect())
        },
        0.0,
        PI,
        kmax + 1,
        opts.quad_rel_tol,
        1e-15,
        4096,
    )?;
    Ok(r.values)
}

/// `int x^k dk` over `(left, right)` for `k = 0..=kmax`, where both ends lie
/// off the spectrum. Uses `(1/pi) Im` of the integral of `z^k G(z)` along the
/// upper half circle from `left` to `right`; the integrand stays analytic,
/// so band edges and their singularities never enter.
pub fn moments_by_contour(g: &QuotientGraph, left: f64, right: f64, kmax: usize, opts: &SolverOptions) -> Result<Vec<f64>, DosError> {
    if !(right > left) {
        return Err(DosError::InvalidOption(format!("empty contour ({left}, {right})")));
    }
    let centre = 0.5 * (left + right);
    let radius = 0.5 * (right - left);
    let r = quadrature::integrate_vec(
        |theta| {
            let e = C64::from_polar(1.0, -theta);
            let z = centre - radius * e;
            let f = mfield::continuation_solve(g, z.re, z.im.max(1e-14), opts).map_err(at(z.re))?;
            let w = f.average_green() * C64::new(0.0, radius) * e;
            let mut zk = C64::new(1.0, 0.0);
            let mut out = Vec::with_capacity(kmax + 1);
            for _ in 0..=kmax {
                out.push((zk * w).im / PI);
                zk *= z;
            }
            Ok::<_, DosError>(out)
        },
        0.0,
        PI,
        kmax + 1,
        1e-12,
        1e-15,
        4096,
    )?;
    Ok(r.values)
}

/// Integrated density of states at `x`, for `x` off the spectrum.
pub fn ids_by_contour(g: &QuotientGraph, x: f64, opts: &SolverOptions) -> Result<f64, DosError> {
    let left = -g.schur_norm_bound() - 1.0;
    if x <= left {
        return Ok(0.0);
    }
    Ok(moments_by_contour(g, left, x, 0, opts)?[0])
}

/// Scans `[-R, R]`, then refines band edges, finds atoms and labels gaps.
pub fn detect_structure(g: &QuotientGraph, opts: &DosOptions) -> Result<SpectralReport, DosError> {
    let resolution = opts.resolution_for(g);
    if !(resolution > 0.0) {
        return Err(DosError::InvalidOption("resolution must be positive".into()));
    }
    if opts.grid_points < 3 {
        return Err(DosError::InvalidOption("grid needs at least 3 points".into()));
    }
    let reach = g.schur_norm_bound() * (1.0 + 1e-3) + 1e-3;
    let n = opts.grid_points;
    let xs: Vec<f64> = (0..n).map(|i| -reach + 2.0 * reach * i as f64 / (n - 1) as f64).collect();
    let probes: Vec<Probe> = xs.par_iter().map(|&x| Probe::take(g, x, opts)).collect::<Result<_, _>>()?;
    let inside: Vec<bool> = probes.iter().map(Probe::in_band).collect();

    // bands
    let mut runs = Vec::new();
    let mut i = 0;
    while i < n {
        if inside[i] {
            let start = i;
            while i + 1 < n && inside[i + 1] {
                i += 1;
            }
            runs.push((start, i));
        }
        i += 1;
    }
    let mut bands = Vec::new();
    for &(s, e) in &runs {
        if !(s..=e).any(|k| probes[k].density() > opts.gap_threshold) {
            continue;
        }
        let lower = refine_edge(g, xs[s - 1], xs[s], opts)?;
        let upper = refine_edge(g, xs[e + 1], xs[e], opts)?;
        if upper - lower < resolution {
            return Err(DosError::UnresolvedStructure { lower, upper, resolution });
        }
        bands.push((lower, upper));
    }

    // atoms: downward jumps of Re G between neighbouring points off the bands
    let mut candidates = Vec::new();
    for k in 0..n - 1 {
        if inside[k] || inside[k + 1] {
            continue;
        }
        let (gl, gr) = (probes[k].re_green(), probes[k + 1].re_green());
        if gl > gr {
            candidates.push(bisect_pole(g, xs[k], xs[k + 1], gl, gr, opts)?);
        }
    }
    if g.has_zero_potential() {
        candidates.push(0.0);
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup_by(|a, b| (*a - *b).abs() < resolution);
    let mut atoms = Vec::new();
    for x in candidates {
        let pm = match point_mass(g, x, &opts.atom_ladder, opts) {
            Ok(pm) => pm,
            Err(DosError::NonAtomic { .. }) => continue,
            Err(e) => return Err(e),
        };
        if pm.weight > opts.atom_threshold {
            atoms.push(pm);
        }
    }
    // masses and moments, each band cut out by a contour between the
    // neighbouring gaps
    let p = g.p();
    let mut cuts: Vec<f64> = bands.iter().flat_map(|&(l, u)| [l, u]).collect();
    for a in &atoms {
        if !bands.iter().any(|&(l, u)| l <= a.location && a.location <= u) {
            cuts.extend([a.location, a.location]);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let outer = reach + 1.0;
    let mut report_bands = Vec::with_capacity(bands.len());
    for &(lower, upper) in &bands {
        let left = cuts.iter().rev().find(|&&c| c < lower).map_or(-outer, |&c| 0.5 * (c + lower));
        let right = cuts.iter().find(|&&c| c > upper).map_or(outer, |&c| 0.5 * (c + upper));
        let mut moments = moments_by_contour(g, left, right, opts.max_moment, &opts.solver)?;
        for a in atoms.iter().filter(|a| lower <= a.location && a.location <= upper) {
            for (k, m) in moments.iter_mut().enumerate() {
                *m -= a.weight * a.location.powi(k as i32);
            }
        }
        report_bands.push(Band { lower, upper, mass: moments[0], moments });
    }
    let point_masses: Vec<ReportedMass> = atoms
        .into_iter()
        .map(|a| ReportedMass {
            location: a.location,
            weight: a.weight,
            weight_times_p: (a.weight * p as f64).round() as i64,
            per_vertex: a.per_vertex,
        })
        .collect();
    let total_mass = report_bands.iter().map(|b| b.mass).sum::<f64>() + point_masses.iter().map(|a| a.weight).sum::<f64>();

    // gaps between consecutive components; atoms inside a band do not split it
    let mut components: Vec<(f64, f64)> = report_bands.iter().map(|b| (b.lower, b.upper)).collect();
    for a in &point_masses {
        if !report_bands.iter().any(|b| b.lower <= a.location && a.location <= b.upper) {
            components.push((a.location, a.location));
        }
    }
    components.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut report = SpectralReport {
        bands: report_bands,
        gaps: Vec::new(),
        point_masses,
        total_mass,
        period: p,
        resolution,
    };
    for w in components.windows(2) {
        let (lower, upper) = (w[0].1, w[1].0);
        if upper <= lower {
            continue;
        }
        let ids = report.ids_below(0.5 * (lower + upper));
        let (label, label_defect) = nearest_label(ids, p);
        report.gaps.push(Gap {
            lower,
            upper,
            ids_value: ids,
            label,
            label_defect,
            unresolved: upper - lower < resolution,
        });
    }
    Ok(report)
}

/// Gaps whose IDS is further than `tol` from `j/p` with `0 < j < p`.
pub fn gap_label_violations(report: &SpectralReport, tol: f64) -> Vec<Gap> {
    report
        .gaps
        .iter()
        .filter(|gap| {
            let j = gap.label.numerator;
            gap.label_defect > tol || j <= 0 || j >= report.period as i64
        })
        .cloned()
        .collect()
}

// ---------------------------------------------------------------------------
// reflection symmetry

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryVerdict {
    pub max_asymmetry: f64,
    /// Only asserted for odd period.
    pub zero_in_spectrum: Option<bool>,
    pub passed: bool,
}

/// For zero potential: `density(x) = density(-x)` at `samples` points, and
/// for odd period `0` lies in the spectrum.
pub fn symmetry_check(
    g: &QuotientGraph,
    report: &SpectralReport,
    samples: usize,
    tol: f64,
    opts: &DosOptions,
) -> Result<SymmetryVerdict, DosError> {
    if !g.has_zero_potential() {
        return Err(DosError::NotApplicable("potential is not identically zero".into()));
    }
    let r = g.schur_norm_bound();
    let xs: Vec<f64> = (1..=samples).map(|i| r * (i as f64 - 0.5) / samples as f64).collect();
    let solve = |x: f64| mfield::continuation_solve(g, x, opts.eps_fine, &opts.solver).map_err(at(x));
    let max_asymmetry = xs
        .par_iter()
        .map(|&x| Ok((solve(x)?.average_density() - solve(-x)?.average_density()).abs()))
        .collect::<Result<Vec<f64>, DosError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let zero_in_spectrum = (g.p() % 2 == 1).then(|| report.contains(0.0));
    let passed = max_asymmetry <= tol && zero_in_spectrum.unwrap_or(true);
    Ok(SymmetryVerdict { max_asymmetry, zero_in_spectrum, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn grid_values() {
        let opts = SolverOptions::default();
        let d4 = density_grid(&fixtures::regular(4), &[0.0, 5.0], 1e-6, &opts).unwrap();
        assert!((d4.average[0] - 12f64.sqrt() / (8.0 * PI)).abs() < 1e-4);
        // off the spectrum the density is O(eps)
        assert!(d4.average[1] < 1e-6);
        for (_, g) in fixtures::catalog() {
            let x = g.schur_norm_bound() + 1.0;
            let outside = density_grid(&g, &[x], 1e-9, &opts).unwrap();
            assert!(outside.average[0] < 1e-8);
        }
        let p2 = density_grid(&fixtures::period_two(3, 1.0), &[2.0], 1e-6, &opts).unwrap();
        assert!((p2.average[0] - 15f64.sqrt() / (6.0 * PI)).abs() < 1e-4);
        assert!(density_grid(&fixtures::line(), &[1.0, 0.0], 1e-6, &opts).is_err());
    }

    #[test]
    fn two_height_test() {
        let opts = DosOptions::default();
        let g = fixtures::rg(3, 2);
        assert!(in_band(&g, 1.0, &opts).unwrap());
        assert!(!in_band(&g, 0.2, &opts).unwrap());
        assert!(!in_band(&g, 0.0, &opts).unwrap());
        assert!(!in_band(&g, 3.0, &opts).unwrap());
    }

    #[test]
    fn residues_rg() {
        let opts = DosOptions::default();
        let g = fixtures::rg(3, 2);
        let pm = point_mass(&g, 0.0, &opts.atom_ladder, &opts).unwrap();
        for j in 0..3 {
            assert!((pm.per_vertex[j] - 1.0 / 3.0).abs() < 1e-6);
        }
        for j in 3..5 {
            assert!(pm.per_vertex[j].abs() < 1e-6);
        }
        assert!((pm.weight - 0.2).abs() < 1e-6);
        let none = point_mass(&fixtures::regular(4), 0.0, &opts.atom_ladder, &opts).unwrap();
        assert!(none.weight.abs() < 1e-9);
        let far = point_mass(&g, 7.0, &opts.atom_ladder, &opts).unwrap();
        assert_eq!(far.weight, 0.0);
    }

    #[test]
    fn contour_ids_matches_masses() {
        let opts = SolverOptions::default();
        let g = fixtures::rg(3, 2);
        assert!((ids_by_contour(&g, 0.2, &opts).unwrap() - 0.6).abs() < 1e-6);
        assert!((ids_by_contour(&g, -0.2, &opts).unwrap() - 0.4).abs() < 1e-6);
        assert!((ids_by_contour(&g, 3.0, &opts).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn labels() {
        assert_eq!(nearest_label(0.4000001, 5).0, Label { numerator: 2, denominator: 5 });
        assert_eq!(format!("{}", nearest_label(0.5, 2).0), "1/2");
    }
}
