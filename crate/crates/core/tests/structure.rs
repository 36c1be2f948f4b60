use treejac::aomoto;
use treejac::dos::{self, DosError, DosOptions};
use treejac::{fixtures, oracles};

#[test]
fn zero_potential_spectra_are_symmetric() {
    let opts = DosOptions::default();
    let ac = fixtures::ac(1.0, 1.0);
    let report = dos::detect_structure(&ac, &opts).unwrap();
    let v = dos::symmetry_check(&ac, &report, 64, 1e-6, &opts).unwrap();
    assert!(v.passed && v.zero_in_spectrum == Some(true), "{v:?}");
    assert!(report.band_containing(0.0).is_some());

    let ace = fixtures::ace(1.0, 0.4, 0.4);
    let report = dos::detect_structure(&ace, &opts).unwrap();
    let v = dos::symmetry_check(&ace, &report, 64, 1e-6, &opts).unwrap();
    assert!(v.passed && v.zero_in_spectrum.is_none(), "{v:?}");
    let gap = report.gap_containing(0.0).expect("gap around zero");
    assert!((gap.lower + gap.upper).abs() < 1e-9);

    let p2 = fixtures::period_two(3, 1.0);
    let report = dos::detect_structure(&p2, &opts).unwrap();
    assert!(matches!(dos::symmetry_check(&p2, &report, 8, 1e-6, &opts), Err(DosError::NotApplicable(_))));
}

#[test]
fn fts_gap_verdict_matches_criterion() {
    let opts = DosOptions::default();
    for a1 in [1.2, 1.3, 1.45, 1.5, 1.7] {
        let weights = [a1, 1.0, 1.0];
        let model = oracles::FtsModel::new(&weights).unwrap();
        let report = dos::detect_structure(&fixtures::fts(&weights), &opts).unwrap();
        assert_eq!(report.gap_containing(0.0).is_some(), oracles::fts_gap_open(&model), "a1 = {a1}");
    }
}

#[test]
fn scaling_moves_atoms_and_keeps_indices() {
    let opts = DosOptions::default();
    let g = fixtures::rg(3, 2);
    let base = aomoto::index_report(&g, 0.0, &opts).unwrap();
    let scaled = aomoto::index_report(&g.scaled(2.0).unwrap(), 0.0, &opts).unwrap();
    assert_eq!((base.x1.clone(), base.index), (scaled.x1.clone(), scaled.index));
    assert!((base.dos_mass - scaled.dos_mass).abs() < 1e-9);

    let report = dos::detect_structure(&g.scaled(2.0).unwrap(), &opts).unwrap();
    let plain = dos::detect_structure(&g, &opts).unwrap();
    for (a, b) in plain.bands.iter().zip(&report.bands) {
        assert!((2.0 * a.lower - b.lower).abs() < 1e-6 && (2.0 * a.upper - b.upper).abs() < 1e-6);
    }
    assert_eq!(report.point_masses.len(), 1);
    assert!(report.point_masses[0].location.abs() < 1e-9);
}

#[test]
fn green_sites_carry_no_residue() {
    let opts = DosOptions::default();
    let pm = dos::point_mass(&fixtures::rg(3, 2), 0.0, &opts.atom_ladder, &opts).unwrap();
    for j in 0..3 {
        assert!((pm.per_vertex[j] - 1.0 / 3.0).abs() < 1e-6);
    }
    assert!(pm.per_vertex[3].abs() < 1e-6 && pm.per_vertex[4].abs() < 1e-6);
    let far = dos::point_mass(&fixtures::rg(3, 2), 7.0, &opts.atom_ladder, &opts).unwrap();
    assert_eq!(far.weight, 0.0);
}

#[test]
fn kesten_mckay_is_reproduced() {
    let g = fixtures::regular(3);
    let s = 2.0 * 2f64.sqrt();
    let xs: Vec<f64> = (0..64).map(|i| -0.98 * s + 1.96 * s * i as f64 / 63.0).collect();
    let grid = dos::density_grid(&g, &xs, 1e-12, &Default::default()).unwrap();
    for (x, d) in xs.iter().zip(&grid.average) {
        assert!((d - oracles::kesten_mckay(3, *x)).abs() < 1e-4, "x = {x}");
    }
}
