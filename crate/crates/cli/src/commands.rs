use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use treejac::aomoto::{self, AomotoError};
use treejac::dos::{self, DosError, DosOptions, SpectralReport};
use treejac::graph::{self, spanning_decomposition};
use treejac::mfield::{self, HalfPlanePoint, SolveError, SolverOptions};
use treejac::oracles;
use treejac::truncation::{self, PairingMode, TruncationError};
use treejac::{QuotientGraph, RawGraph};

use crate::{CliError, Common, Mode};

type Result<T> = std::result::Result<T, CliError>;

impl From<DosError> for CliError {
    fn from(e: DosError) -> Self {
        match e {
            DosError::InvalidOption(_) | DosError::NotApplicable(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<AomotoError> for CliError {
    fn from(e: AomotoError) -> Self {
        match e {
            AomotoError::Dos(inner) => inner.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<TruncationError> for CliError {
    fn from(e: TruncationError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

struct Input {
    graph: QuotientGraph,
    path: String,
    digest: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn load(c: &Common) -> Result<Input> {
    let path = c.input.as_ref().ok_or_else(|| CliError::Invalid("--input is required".into()))?;
    let bytes = fs::read(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Invalid("input is not UTF-8".into()))?;
    let raw = RawGraph::from_json(&text).map_err(|e| CliError::Invalid(format!("invalid graph: {e}")))?;
    let graph = graph::validate(&raw).map_err(|e| CliError::Invalid(format!("invalid graph: {e}")))?;
    Ok(Input { graph, path: path.display().to_string(), digest: hex(&Sha256::digest(&bytes)) })
}

fn positive(name: &str, v: Option<f64>, default: f64) -> Result<f64> {
    let v = v.unwrap_or(default);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Invalid(format!("--{name} must be positive, got {v}")))
    }
}

fn dos_options(c: &Common) -> Result<DosOptions> {
    let mut opts = DosOptions::default();
    if let Some(n) = c.grid {
        if n < 16 {
            return Err(CliError::Invalid(format!("--grid must be at least 16, got {n}")));
        }
        opts.grid_points = n;
    }
    Ok(opts)
}

fn provenance(input: Option<&Input>, c: &Common, opts: &DosOptions, tolerances: &[(&str, f64)]) -> Value {
    json!({
        "tool": "treejac",
        "version": env!("CARGO_PKG_VERSION"),
        "input": input.map(|i| i.path.clone()),
        "input_sha256": input.map(|i| i.digest.clone()),
        "seed": c.seed,
        "spanning_seed": 0,
        "eps_ladder": {
            "band_test": [opts.eps_fine, opts.eps_coarse],
            "residues": opts.atom_ladder,
        },
        "tolerances": tolerances.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<BTreeMap<_, _>>(),
    })
}

/// Prints `value` and, with `--out`, writes it to `name` there.
fn emit(c: &Common, name: &str, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serialisable") + "\n";
    print!("{text}");
    write_artifact(c, name, &text)
}

fn write_artifact(c: &Common, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = &c.out {
        fs::create_dir_all(dir).map_err(|e| CliError::Invalid(format!("cannot create {}: {e}", dir.display())))?;
        let path = Path::new(dir).join(name);
        fs::write(&path, text).map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn check(passed: bool, what: &str) -> Result<()> {
    if passed {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{what} failed")))
    }
}

pub fn validate(c: &Common) -> Result<()> {
    let input = load(c)?;
    let g = &input.graph;
    let value = json!({
        "p": g.p(),
        "q": g.q(),
        "rank": g.rank(),
        "period": g.period(),
        "schur_norm_bound": g.schur_norm_bound(),
        "regular_degree": g.regular_degree(),
        "zero_potential": g.has_zero_potential(),
        "decomposition": spanning_decomposition(g, 0),
        "provenance": provenance(Some(&input), c, &DosOptions::default(), &[]),
    });
    emit(c, "validate.json", &value)
}

fn report_json(report: &SpectralReport, prov: Value) -> Value {
    let mut value = serde_json::to_value(report).expect("serialisable");
    value["provenance"] = prov;
    value
}

pub fn dos(c: &Common) -> Result<()> {
    let input = load(c)?;
    let g = &input.graph;
    let opts = dos_options(c)?;
    let eps = positive("eps", c.eps, opts.eps_fine)?;
    let report = dos::detect_structure(g, &opts)?;

    let reach = g.schur_norm_bound() + 0.1;
    let n = opts.grid_points;
    let xs: Vec<f64> = (0..n).map(|i| -reach + 2.0 * reach * i as f64 / (n - 1) as f64).collect();
    let grid = dos::density_grid(g, &xs, eps, &opts.solver)?;
    let mut csv = String::from("x,eps,density_avg");
    for j in 0..g.p() {
        let _ = write!(csv, ",density_v{j}");
    }
    csv.push('\n');
    for (i, x) in grid.xs.iter().enumerate() {
        let _ = write!(csv, "{},{},{}", fmt17(*x), fmt17(eps), fmt17(grid.average[i]));
        for column in &grid.per_vertex {
            let _ = write!(csv, ",{}", fmt17(column[i]));
        }
        csv.push('\n');
    }
    write_artifact(c, "density.csv", &csv)?;
    let prov = provenance(Some(&input), c, &opts, &[("grid_eps", eps), ("quad_rel_tol", opts.quad_rel_tol), ("gap_threshold", opts.gap_threshold)]);
    emit(c, "report.json", &report_json(&report, prov))
}

pub fn moments(c: &Common) -> Result<()> {
    let input = load(c)?;
    let g = &input.graph;
    let opts = dos_options(c)?;
    let tol = positive("tol", c.tol, 1e-6)?;
    let kmax = c.max_k.unwrap_or(8);
    if kmax > opts.max_moment {
        return Err(CliError::Invalid(format!("--max-k is at most {}", opts.max_moment)));
    }
    let report = dos::detect_structure(g, &opts)?;
    let walks = truncation::dos_moments(g, kmax);
    let mut rows = Vec::new();
    let mut passed = true;
    for (k, &w) in walks.iter().enumerate() {
        let q = report.moment(k);
        let rel = (q - w).abs() / w.abs().max(1.0);
        passed &= rel <= tol;
        rows.push(json!({ "k": k, "walks": w, "spectral": q, "relative_deviation": rel }));
    }
    let value = json!({
        "moments": rows,
        "passed": passed,
        "provenance": provenance(Some(&input), c, &opts, &[("moment_rel_tol", tol)]),
    });
    emit(c, "moments.json", &value)?;
    check(passed, "moment comparison")
}

pub fn truncate(c: &Common) -> Result<()> {
    let input = load(c)?;
    let g = &input.graph;
    let r = c.r.unwrap_or(2);
    let cap = c.cap.unwrap_or(truncation::DEFAULT_CAP);
    let mode = c.mode.unwrap_or(Mode::Free);
    let ball = truncation::build_ball(g, r, cap)?;
    let measure = match mode {
        Mode::Free => truncation::free_bc_spectrum(&ball),
        Mode::Canonical => truncation::periodic_bc_spectrum(&ball, &truncation::make_pairing(&ball, PairingMode::Canonical)?)?,
        Mode::Random => {
            truncation::periodic_bc_spectrum(&ball, &truncation::make_pairing(&ball, PairingMode::Random { seed: c.seed })?)?
        }
    };
    let mut csv = String::from("eigenvalue\n");
    for l in &measure.eigenvalues {
        csv.push_str(&fmt17(*l));
        csv.push('\n');
    }
    write_artifact(c, "eigenvalues.csv", &csv)?;
    let reach = g.schur_norm_bound();
    let bins = c.grid.unwrap_or(64).max(1);
    let (bin_edges, counts) = measure.histogram(-reach, reach, bins);
    let mode_name = match mode {
        Mode::Free => "free",
        Mode::Canonical => "canonical",
        Mode::Random => "random",
    };
    let mut value = json!({
        "bin_edges": bin_edges,
        "counts": counts,
        "n": measure.len(),
        "seed": c.seed,
        "mode": mode_name,
        "r": r,
        "second_moment": measure.moment(2),
        "tree_second_moment": truncation::dos_moment(g, 2),
        "provenance": provenance(Some(&input), c, &DosOptions::default(), &[]),
    });
    if mode == Mode::Free {
        value["defect"] = serde_json::to_value(truncation::second_moment_defect(g, &ball, &measure)).expect("serialisable");
    }
    emit(c, "histogram.json", &value)
}

#[derive(Serialize)]
struct OracleRow {
    model: String,
    quantity: &'static str,
    max_deviation: f64,
    tolerance: f64,
    passed: bool,
}

fn random_points(rng: &mut ChaCha8Rng, reach: f64, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-reach - 1.0..reach + 1.0), rng.gen_range(0.1..5.0))).collect()
}

fn solver_rows(
    rows: &mut Vec<OracleRow>,
    model: String,
    g: &QuotientGraph,
    zs: &[C64],
    oracle: impl Fn(C64) -> Vec<C64>,
) -> Result<()> {
    let opts = SolverOptions::default();
    let mut worst: f64 = 0.0;
    for &z in zs {
        let f = mfield::solve_m(g, HalfPlanePoint::new(z)?, &opts)?;
        for (j, want) in oracle(z).into_iter().enumerate() {
            worst = worst.max((f.green(j) - want).norm() / want.norm().max(1.0));
        }
    }
    rows.push(OracleRow { model, quantity: "G", max_deviation: worst, tolerance: 1e-9, passed: worst <= 1e-9 });
    Ok(())
}

pub fn oracle_check(c: &Common) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = Vec::new();
    for d in [3, 4, 6] {
        let model = oracles::RegularModel::new(d).map_err(|e| CliError::Invalid(e.to_string()))?;
        let g = model.graph();
        let zs = random_points(&mut rng, g.schur_norm_bound(), 20);
        solver_rows(&mut rows, format!("regular d={d}"), &g, &zs, |z| vec![oracles::regular_g(model, z); 2])?;
    }
    for (r, gr) in [(3, 2), (5, 2)] {
        let model = oracles::RgModel::new(r, gr).map_err(|e| CliError::Invalid(e.to_string()))?;
        let g = model.graph();
        let zs = random_points(&mut rng, g.schur_norm_bound(), 20);
        solver_rows(&mut rows, format!("red/green r={r} g={gr}"), &g, &zs, |z| {
            let (a, b) = oracles::rg_g(model, z);
            (0..r + gr).map(|j| if j < r { a } else { b }).collect()
        })?;
        let opts = DosOptions::default();
        let pm = dos::point_mass(&g, 0.0, &opts.atom_ladder, &opts)?;
        let dev = (pm.weight - oracles::rg_atom(model)).abs();
        rows.push(OracleRow { model: format!("red/green r={r} g={gr}"), quantity: "atom at 0", max_deviation: dev, tolerance: 1e-6, passed: dev <= 1e-6 });
    }
    for (d, b) in [(3, 1.0), (4, 0.5)] {
        let model = oracles::PeriodTwoModel::new(d, b).map_err(|e| CliError::Invalid(e.to_string()))?;
        let g = model.graph();
        let zs = random_points(&mut rng, g.schur_norm_bound(), 20);
        solver_rows(&mut rows, format!("period two d={d} b={b}"), &g, &zs, |z| {
            let (a, m) = oracles::p2_g(model, z);
            vec![a, m]
        })?;
    }
    let fts = oracles::FtsModel::new(&[1.5, 1.0, 1.0]).map_err(|e| CliError::Invalid(e.to_string()))?;
    let norm = oracles::fts_row_norm_sq(&fts).map_err(|e| CliError::Invalid(e.to_string()))?;
    rows.push(OracleRow { model: "fts a=(1.5,1,1)".into(), quantity: "kernel row norm^2 vs 4", max_deviation: (norm - 4.0).abs(), tolerance: 1e-9, passed: (norm - 4.0).abs() <= 1e-9 });

    let passed = rows.iter().all(|r| r.passed);
    for r in &rows {
        eprintln!("{:<28} {:<24} {:>10.3e}  {}", r.model, r.quantity, r.max_deviation, if r.passed { "PASS" } else { "FAIL" });
    }
    let value = json!({
        "checks": rows,
        "passed": passed,
        "provenance": provenance(None, c, &DosOptions::default(), &[("solver_vs_oracle", 1e-9)]),
    });
    emit(c, "oracle_check.json", &value)?;
    check(passed, "oracle check")
}

pub fn aomoto(c: &Common) -> Result<()> {
    let input = load(c)?;
    let lambda = c.lambda.ok_or_else(|| CliError::Invalid("--lambda is required".into()))?;
    let opts = DosOptions::default();
    let threshold = c.tol.unwrap_or(aomoto::POLE_THRESHOLD);
    let report = aomoto::index_report_with(&input.graph, lambda, threshold, &opts)?;
    let mut value = serde_json::to_value(&report).expect("serialisable");
    value["consistency_defect"] = json!(report.defect());
    value["provenance"] = provenance(Some(&input), c, &opts, &[("pole_threshold", threshold)]);
    emit(c, "aomoto.json", &value)?;
    check(report.index >= 1 && report.defect() <= 1e-3, "index consistency")
}

pub fn consistency(c: &Common) -> Result<()> {
    let input = load(c)?;
    let g = &input.graph;
    let tol = positive("tol", c.tol, 1e-10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let zs = random_points(&mut rng, g.schur_norm_bound(), c.grid.unwrap_or(20));
    let opts = SolverOptions::default();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for z in zs {
        let f = mfield::solve_m(g, HalfPlanePoint::new(z)?, &opts)?;
        let defect = mfield::greens_consistency(g, &f);
        worst = worst.max(defect);
        rows.push(json!({ "re": z.re, "im": z.im, "defect": defect, "residual": f.residual }));
    }
    let value = json!({
        "points": rows,
        "max_defect": worst,
        "passed": worst <= tol,
        "provenance": provenance(Some(&input), c, &DosOptions::default(), &[("defect_tol", tol), ("solver_tol", opts.tol)]),
    });
    emit(c, "consistency.json", &value)?;
    check(worst <= tol, "consistency")
}

pub fn gap_label(c: &Common) -> Result<()> {
    let input = load(c)?;
    let opts = dos_options(c)?;
    let tol = positive("tol", c.tol, 1e-4)?;
    let report = dos::detect_structure(&input.graph, &opts)?;
    let violations = dos::gap_label_violations(&report, tol);
    let gaps: Vec<Value> = report
        .gaps
        .iter()
        .map(|gap| {
            json!({
                "lower": gap.lower,
                "upper": gap.upper,
                "ids": gap.ids_value,
                "label": gap.label.to_string(),
                "defect": gap.label_defect,
                "unresolved": gap.unresolved,
            })
        })
        .collect();
    let value = json!({
        "period": report.period,
        "gaps": gaps,
        "violations": violations.len(),
        "passed": violations.is_empty(),
        "provenance": provenance(Some(&input), c, &opts, &[("label_tol", tol)]),
    });
    emit(c, "gap_label.json", &value)?;
    check(violations.is_empty(), "gap labelling")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_failure_kind() {
        let z = C64::new(0.0, 1e-3);
        let stuck = SolveError::NoConvergence { z, iterations: 5, residual: 1.0 };
        assert_eq!(CliError::from(stuck.clone()).code(), 2);
        assert_eq!(CliError::from(DosError::Solve { x: 0.0, source: stuck }).code(), 2);
        assert_eq!(CliError::from(DosError::NotApplicable("b".into())).code(), 1);
        assert_eq!(CliError::from(AomotoError::EmptySupport { lambda: 0.0 }).code(), 1);
        assert_eq!(CliError::from(SolveError::NotInUpperHalfPlane { z }).code(), 1);
    }
}
