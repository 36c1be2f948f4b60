//! Adaptive Gauss–Kronrod quadrature and polynomial extrapolation.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];

/// Gauss weights for the odd-indexed Kronrod nodes (plus the centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule with its embedded 7-point Gauss estimate.
/// Returns `(kronrod, |kronrod - gauss|)`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Globally adaptive Gauss–Kronrod: repeatedly bisects the interval with the
/// largest error estimate until the total is below `abs_tol`, or
/// `max_intervals` is reached.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, max_intervals: usize) -> Integral {
    if a == b {
        return Integral { value: 0.0, error: 0.0, intervals: 0 };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= abs_tol || parts.len() >= max_intervals {
            break;
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval at machine resolution; keep it as is
            let (v, _) = gk15(&mut f, lo, hi);
            parts.push((lo, hi, v, 0.0));
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Integral {
        value: parts.iter().map(|p| p.2).sum(),
        error: parts.iter().map(|p| p.3).sum(),
        intervals: parts.len(),
    }
}

/// Result of [`integrate_vec`]: one value and error estimate per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VecIntegral {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub intervals: usize,
    pub converged: bool,
}

fn kronrod_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [c; 15];
    for i in 0..7 {
        x[2 * i] = c - h * XGK[i];
        x[2 * i + 1] = c + h * XGK[i];
    }
    x
}

fn kronrod_combine(a: f64, b: f64, fx: &[Vec<f64>], dims: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dims];
    let mut g = vec![0.0; dims];
    for c in 0..dims {
        k[c] = WGK[7] * fx[14][c];
        g[c] = WG[3] * fx[14][c];
        for i in 0..7 {
            let s = fx[2 * i][c] + fx[2 * i + 1][c];
            k[c] += WGK[i] * s;
            if i % 2 == 1 {
                g[c] += WG[i / 2] * s;
            }
        }
    }
    let err = k.iter().zip(&g).map(|(k, g)| ((k - g) * h).abs()).collect();
    (k.into_iter().map(|k| k * h).collect(), err)
}

/// Adaptive Gauss–Kronrod for a vector-valued integrand whose evaluations
/// are expensive. Every refinement round evaluates all new nodes as one
/// parallel batch. Component `c` is converged when its error estimate is
/// below `rel_tol * int |f_c| + abs_tol` (the integral of `|f_c|` estimated
/// piecewise).
pub fn integrate_vec<F, E>(f: F, a: f64, b: f64, dims: usize, rel_tol: f64, abs_tol: f64, max_intervals: usize) -> Result<VecIntegral, E>
where
    F: Fn(f64) -> Result<Vec<f64>, E> + Sync,
    E: Send,
{
    use rayon::prelude::*;

    let eval = |intervals: &[(f64, f64)]| -> Result<Vec<(f64, f64, Vec<f64>, Vec<f64>)>, E> {
        let nodes: Vec<f64> = intervals.iter().flat_map(|&(lo, hi)| kronrod_nodes(lo, hi)).collect();
        let values: Vec<Vec<f64>> = nodes.par_iter().map(|&x| f(x)).collect::<Result<_, E>>()?;
        Ok(intervals
            .iter()
            .zip(values.chunks(15))
            .map(|(&(lo, hi), fx)| {
                let (v, e) = kronrod_combine(lo, hi, fx, dims);
                (lo, hi, v, e)
            })
            .collect())
    };

    let mut parts = eval(&[(a, b)])?;
    let mut converged = false;
    loop {
        let errs: Vec<f64> = (0..dims).map(|c| parts.iter().map(|p| p.3[c]).sum()).collect();
        // scale by the integral of |f| so that components cancelling to zero
        // do not demand an absolute accuracy of `abs_tol`
        let scales: Vec<f64> = (0..dims).map(|c| parts.iter().map(|p| p.2[c].abs()).sum::<f64>()).collect();
        let tols: Vec<f64> = scales.iter().map(|t| rel_tol * t + abs_tol).collect();
        if errs.iter().zip(&tols).all(|(e, t)| e <= t) {
            converged = true;
            break;
        }
        if parts.len() >= max_intervals {
            break;
        }
        // split every interval holding more than its share of some budget
        let n = parts.len() as f64;
        let (split, keep): (Vec<_>, Vec<_>) = parts
            .into_iter()
            .partition(|p| (0..dims).any(|c| p.3[c] > tols[c] / n && errs[c] > tols[c]));
        let halves: Vec<(f64, f64)> = split
            .iter()
            .flat_map(|&(lo, hi, _, _)| {
                let mid = 0.5 * (lo + hi);
                [(lo, mid), (mid, hi)]
            })
            .collect();
        parts = keep;
        parts.extend(eval(&halves)?);
    }
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(VecIntegral {
        values: (0..dims).map(|c| parts.iter().map(|p| p.2[c]).sum()).collect(),
        errors: (0..dims).map(|c| parts.iter().map(|p| p.3[c]).sum()).collect(),
        intervals: parts.len(),
        converged,
    })
}

/// Value at `0` of the interpolating polynomial through `(xs[i], ys[i])`,
/// by Neville's scheme.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}
