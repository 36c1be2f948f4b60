//! Eigenvalue multiplicities from the pole structure of the Green's function.
//!
//! At an eigenvalue `lambda` the unnormalised trace of the eigenprojection is
//! `p(X1) - q(X1) - p(X-1)`, where `X1` is the set of vertices whose `G_j`
//! has a pole at `lambda`, `q(X1)` counts edges inside it and `X-1` is its
//! outer neighbourhood. It equals `p` times the DOS atom at `lambda`.

use serde::Serialize;
use thiserror::Error;

use crate::dos::{self, DosError, DosOptions};
use crate::graph::QuotientGraph;

/// Default residue cutoff for pole membership.
pub const POLE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AomotoError {
    #[error(transparent)]
    Dos(#[from] DosError),
    #[error("no vertex has a pole at {lambda}")]
    EmptySupport { lambda: f64 },
    #[error("pole support contains a cycle through vertices {vertices:?}")]
    CycleInSupport { vertices: Vec<usize> },
    #[error("pole support touches the self-loop at vertex {vertex}; the self-loop variant of the index is not implemented")]
    NotSupported { vertex: usize },
    #[error("graph is not regular")]
    NotRegular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AomotoReport {
    pub lambda: f64,
    pub x1: Vec<usize>,
    pub xm1: Vec<usize>,
    pub p_x1: usize,
    pub q_x1: usize,
    pub p_xm1: usize,
    pub index: i64,
    pub dos_mass: f64,
    pub mass_times_p: f64,
    pub residues: Vec<f64>,
    pub threshold: f64,
    /// Smallest residue admitted to `x1` and largest one left out; a wide
    /// separation means the cutoff is not delicate.
    pub smallest_included: f64,
    pub largest_excluded: f64,
}

impl AomotoReport {
    pub fn defect(&self) -> f64 {
        (self.mass_times_p - self.index as f64).abs()
    }
}

/// Vertices whose extrapolated residue `lim eps Im G_j(lambda + i eps)`
/// exceeds `threshold`, with all residues.
pub fn pole_support(
    g: &QuotientGraph,
    lambda: f64,
    ladder: &[f64],
    threshold: f64,
    opts: &DosOptions,
) -> Result<(Vec<usize>, dos::PointMass), AomotoError> {
    let pm = dos::point_mass(g, lambda, ladder, opts)?;
    let support = (0..g.p()).filter(|&j| pm.per_vertex[j] > threshold).collect();
    Ok((support, pm))
}

/// First cycle among the edges with both ends in `set`, as a vertex list.
fn cycle_in(g: &QuotientGraph, inside: &[bool]) -> Option<Vec<usize>> {
    let mut parent: Vec<usize> = (0..g.p()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in g.edges() {
        if !(inside[e.u] && inside[e.v]) {
            continue;
        }
        let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if a == b {
            let root = a;
            let mut cyc: Vec<usize> = (0..g.p()).filter(|&j| inside[j] && find(&mut parent, j) == root).collect();
            cyc.sort_unstable();
            return Some(cyc);
        }
        parent[a] = b;
    }
    None
}

pub fn index_report(g: &QuotientGraph, lambda: f64, opts: &DosOptions) -> Result<AomotoReport, AomotoError> {
    index_report_with(g, lambda, POLE_THRESHOLD, opts)
}

pub fn index_report_with(g: &QuotientGraph, lambda: f64, threshold: f64, opts: &DosOptions) -> Result<AomotoReport, AomotoError> {
    let (x1, pm) = pole_support(g, lambda, &opts.atom_ladder, threshold, opts)?;
    if x1.is_empty() {
        return Err(AomotoError::EmptySupport { lambda });
    }
    let mut inside = vec![false; g.p()];
    for &j in &x1 {
        inside[j] = true;
    }
    if let Some(e) = g.edges().iter().find(|e| e.is_loop() && inside[e.u]) {
        return Err(AomotoError::NotSupported { vertex: e.u });
    }
    if let Some(vertices) = cycle_in(g, &inside) {
        return Err(AomotoError::CycleInSupport { vertices });
    }
    let q_x1 = g.edges().iter().filter(|e| inside[e.u] && inside[e.v]).count();
    let mut outer = vec![false; g.p()];
    for e in g.edges() {
        if inside[e.u] != inside[e.v] {
            outer[if inside[e.u] { e.v } else { e.u }] = true;
        }
    }
    let xm1: Vec<usize> = (0..g.p()).filter(|&j| outer[j]).collect();
    let index = x1.len() as i64 - q_x1 as i64 - xm1.len() as i64;
    let smallest_included = x1.iter().map(|&j| pm.per_vertex[j]).fold(f64::INFINITY, f64::min);
    let largest_excluded = (0..g.p()).filter(|&j| !inside[j]).map(|j| pm.per_vertex[j]).fold(0.0, f64::max);
    Ok(AomotoReport {
        lambda,
        p_x1: x1.len(),
        q_x1,
        p_xm1: xm1.len(),
        x1,
        xm1,
        index,
        dos_mass: pm.weight,
        mass_times_p: pm.weight * g.p() as f64,
        residues: pm.per_vertex,
        threshold,
        smallest_included,
        largest_excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularVerdict {
    pub degree: usize,
    pub scanned: usize,
    pub atoms: Vec<f64>,
    pub passed: bool,
}

/// On a regular graph the index is never positive, so no atoms may appear.
/// Checks this on the `points` values `-R + 2R i / points`, which include
/// `-R` and, for even `points`, the centre.
pub fn regular_index_bound(g: &QuotientGraph, points: usize, opts: &DosOptions) -> Result<RegularVerdict, AomotoError> {
    let degree = g.regular_degree().ok_or(AomotoError::NotRegular)?;
    let reach = g.schur_norm_bound();
    let mut atoms = Vec::new();
    for i in 0..points {
        let x = -reach + 2.0 * reach * i as f64 / points as f64;
        match dos::point_mass(g, x, &opts.atom_ladder, opts) {
            Ok(pm) if pm.weight > opts.atom_threshold => atoms.push(x),
            Ok(_) | Err(DosError::NonAtomic { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(RegularVerdict { degree, scanned: points, passed: atoms.is_empty(), atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn rg_three_two() {
        let opts = DosOptions::default();
        let r = index_report(&fixtures::rg(3, 2), 0.0, &opts).unwrap();
        assert_eq!(r.x1, vec![0, 1, 2]);
        assert_eq!(r.xm1, vec![3, 4]);
        assert_eq!((r.p_x1, r.q_x1, r.p_xm1, r.index), (3, 0, 2, 1));
        assert!((r.dos_mass - 0.2).abs() < 1e-6);
        assert!(r.defect() < 1e-3);
        assert!(r.smallest_included > 0.3 && r.largest_excluded < 1e-9);
    }

    #[test]
    fn regular_refuses() {
        let opts = DosOptions::default();
        let err = index_report(&fixtures::regular(4), 0.0, &opts).unwrap_err();
        assert_eq!(err, AomotoError::EmptySupport { lambda: 0.0 });
        let far = pole_support(&fixtures::rg(3, 2), 9.0, &opts.atom_ladder, POLE_THRESHOLD, &opts).unwrap();
        assert!(far.0.is_empty());
        assert_eq!(regular_index_bound(&fixtures::rg(3, 2), 8, &opts).unwrap_err(), AomotoError::NotRegular);
    }

    #[test]
    fn cycles_are_found() {
        let g = fixtures::ace(1.0, 0.4, 0.4);
        assert_eq!(cycle_in(&g, &[true, true]), Some(vec![0, 1]));
        assert_eq!(cycle_in(&g, &[true, false]), None);
        let rg = fixtures::rg(3, 2);
        assert!(cycle_in(&rg, &[true, true, false, true, true]).is_some());
        assert!(cycle_in(&rg, &[true, false, false, true, true]).is_none());
    }
}
