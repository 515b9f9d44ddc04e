//! Composite Simpson on uniform samples and adaptive Gauss–Kronrod (7/15).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature missed its target: estimate {estimate}, error {error} > {target}")]
    Tolerance { estimate: f64, error: f64, target: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("Simpson's rule needs an odd number of at least 3 samples, got {0}")]
    BadSampleCount(usize),
}

/// Composite Simpson over uniformly spaced samples `y` with spacing `h`.
/// The sample count must be odd.
pub fn simpson(y: &[f64], h: f64) -> Result<f64, QuadratureError> {
    let n = y.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(QuadratureError::BadSampleCount(n));
    }
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in y.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(h / 3.0 * (y[0] + y[n - 1] + 4.0 * odd + 2.0 * even))
}

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
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { x: c });
    }
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let (x1, x2) = (c - dx, c + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite { x: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite { x: x2 });
        }
        rk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((rk * hl, ((rk - rg) * hl).abs()))
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `abs_tol` or relative tolerance `rel_tol`, whichever is looser.
/// Returns `(estimate, error_estimate)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64), QuadratureError> {
    let (v0, e0) = gk15(&f, a, b)?;
    let mut intervals = vec![(a, b, v0, e0)];
    loop {
        let total: f64 = intervals.iter().map(|s| s.2).sum();
        let err: f64 = intervals.iter().map(|s| s.3).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            return Ok((total, err));
        }
        if intervals.len() >= max_intervals {
            return Err(QuadratureError::Tolerance { estimate: total, error: err, target });
        }
        let (k, _) =
            intervals.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("non-empty interval list");
        let (lo, hi, _, _) = intervals.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        let (vl, el) = gk15(&f, lo, mid)?;
        let (vr, er) = gk15(&f, mid, hi)?;
        intervals.push((lo, mid, vl, el));
        intervals.push((mid, hi, vr, er));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let n = 11;
        let h = 2.0 / (n - 1) as f64;
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 * h;
                x * x * x - 2.0 * x + 1.0
            })
            .collect();
        let v = simpson(&y, h).unwrap();
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-13);
    }

    #[test]
    fn simpson_rejects_even_counts() {
        assert!(simpson(&[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn kronrod_handles_smooth_and_peaked_integrands() {
        let (v, _) = gauss_kronrod(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-14, 1e-14, 100).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        let (v, _) = gauss_kronrod(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12, 500).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() / exact < 1e-11);
    }
}
