use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treejac::mfield::{self, HalfPlanePoint, SolverOptions};
use treejac::{fixtures, oracles, QuotientGraph};

fn catalog_graph(i: usize) -> QuotientGraph {
    let all = fixtures::catalog();
    all[i % all.len()].1.clone()
}

fn random_z(rng: &mut ChaCha8Rng, reach: f64) -> C64 {
    C64::new(rng.gen_range(-reach - 1.0..reach + 1.0), rng.gen_range(0.1..5.0))
}

proptest! {
    #[test]
    fn sweep_maps_cone_into_itself(
        which in 0usize..13,
        x in -8.0f64..8.0,
        y in 1e-3f64..10.0,
        seed in any::<u64>(),
        theta in 0.05f64..1.0,
    ) {
        let g = catalog_graph(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<C64> = (0..g.num_directed())
            .map(|_| C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(1e-6..3.0)))
            .collect();
        let z = C64::new(x, y);
        let next = mfield::sweep(&g, z, &m);
        prop_assert!(next.iter().all(|w| w.im > 0.0));
        // damped steps are convex combinations, hence stay in the cone too
        prop_assert!(m.iter().zip(&next).all(|(a, b)| ((1.0 - theta) * a + theta * b).im > 0.0));
    }

    #[test]
    fn sweep_contracts_high_in_the_half_plane(
        which in 0usize..13,
        x in -5.0f64..5.0,
        lift in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let g = catalog_graph(which);
        let reach = g.schur_norm_bound();
        let z = C64::new(x, 2.0 * reach * (1.0 + lift));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<C64> {
            (0..g.num_directed()).map(|_| C64::new(rng.gen_range(-0.2..0.2), rng.gen_range(1e-6..0.2))).collect()
        };
        let (a, b) = (draw(), draw());
        let dist = |u: &[C64], v: &[C64]| u.iter().zip(v).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        let (sa, sb) = (mfield::sweep(&g, z, &a), mfield::sweep(&g, z, &b));
        // Lipschitz constant sum a^2 / (Im z)^2 <= R^2 / (2R)^2
        prop_assert!(dist(&sa, &sb) <= 0.25 * dist(&a, &b) * (1.0 + 1e-12));
    }
}

#[test]
fn greens_consistency_on_every_fixture() {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, g) in fixtures::catalog() {
        let reach = g.schur_norm_bound();
        for _ in 0..20 {
            let z = random_z(&mut rng, reach);
            let f = mfield::solve_m(&g, HalfPlanePoint::new(z).unwrap(), &opts).unwrap();
            assert!(f.is_herglotz(0.0), "{name} at {z}");
            let defect = mfield::greens_consistency(&g, &f);
            assert!(defect < 1e-10, "{name} at {z}: {defect:e}");
        }
    }
}

fn assert_close(a: C64, b: C64, tol: f64, what: &str) {
    assert!((a - b).norm() <= tol * b.norm().max(1.0), "{what}: {a} vs {b}");
}

#[test]
fn solver_matches_closed_forms() {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [2, 3, 4, 6] {
        let model = oracles::RegularModel::new(d).unwrap();
        let g = model.graph();
        for _ in 0..20 {
            let z = random_z(&mut rng, g.schur_norm_bound());
            let f = mfield::solve_m(&g, HalfPlanePoint::new(z).unwrap(), &opts).unwrap();
            let m = oracles::regular_m(model, z);
            assert!(f.m.iter().all(|w| (w - m).norm() < 1e-9 * m.norm().max(1.0)), "d={d} m at {z}");
            assert_close(f.green(0), oracles::regular_g(model, z), 1e-9, "regular G");
        }
    }
    for (r, gr) in [(3, 2), (5, 2), (3, 3), (4, 3)] {
        let model = oracles::RgModel::new(r, gr).unwrap();
        let g = model.graph();
        for _ in 0..20 {
            let z = random_z(&mut rng, g.schur_norm_bound());
            let f = mfield::solve_m(&g, HalfPlanePoint::new(z).unwrap(), &opts).unwrap();
            let (mr, mg) = oracles::rg_m(model, z);
            let (gr_, gg_) = oracles::rg_g(model, z);
            for e in g.directed_edges() {
                let want = if g.head(e) < r { mr } else { mg };
                assert_close(f.m(e), want, 1e-9, "rg m");
            }
            assert_close(f.green(0), gr_, 1e-9, "rg G red");
            assert_close(f.green(r), gg_, 1e-9, "rg G green");
        }
    }
    for (d, b) in [(2, 0.7), (3, 0.5), (3, 1.0), (4, 1.0)] {
        let model = oracles::PeriodTwoModel::new(d, b).unwrap();
        let g = model.graph();
        for _ in 0..20 {
            let z = random_z(&mut rng, g.schur_norm_bound());
            let f = mfield::solve_m(&g, HalfPlanePoint::new(z).unwrap(), &opts).unwrap();
            let (mp, mm) = oracles::p2_m(model, z);
            let (gp, gm) = oracles::p2_g(model, z);
            for e in g.directed_edges() {
                assert_close(f.m(e), if g.head(e) == 0 { mp } else { mm }, 1e-9, "p2 m");
            }
            assert_close(f.green(0), gp, 1e-9, "p2 G+");
            assert_close(f.green(1), gm, 1e-9, "p2 G-");
        }
    }
}

#[test]
fn fts_pairs_collapse_by_symmetry() {
    // parallel edges of equal weight carry equal m-functions in each direction
    let g = fixtures::fts(&[1.5, 1.0, 1.0]);
    let f = mfield::solve_m(&g, HalfPlanePoint::from_parts(0.3, 0.5).unwrap(), &SolverOptions::default()).unwrap();
    let forward = |e: usize| f.m[2 * e];
    let backward = |e: usize| f.m[2 * e + 1];
    assert!((forward(1) - forward(2)).norm() < 1e-12);
    assert!((backward(1) - backward(2)).norm() < 1e-12);
    // with zero potential both sides of the two-vertex graph look alike
    assert!((forward(0) - backward(0)).norm() < 1e-12);
}

#[test]
fn radial_truncation_error_shrinks_with_height() {
    let full = |y: f64| oracles::radial_halfline_m(3, 2, C64::new(0.7, y)).unwrap();
    let cut = |y: f64| oracles::radial_halfline_m_truncated(3, 2, C64::new(0.7, y), 12);
    let errs: Vec<f64> = [0.2, 0.5, 1.0, 2.0, 4.0].iter().map(|&y| (cut(y) - full(y)).norm()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}
