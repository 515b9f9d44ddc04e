//! Radial Emden solution on the unit disk.
//!
//! The unique positive radial solution of `-Δφ = φ^p` in `B₁`, `φ = 0` on
//! `∂B₁`, obtained by shooting `u(0) = 1` and rescaling by the first zero.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::ode::{Dopri5, OdeError};
use crate::quadrature::{simpson, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmdenError {
    #[error("exponent must satisfy p > 1, got {0}")]
    InvalidExponent(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shooting solution did not cross zero before r = {r_max}")]
    NoZeroFound { r_max: f64 },
    #[error("computed profile is not strictly decreasing near r = {r}")]
    NonMonotone { r: f64 },
    #[error("radius {0} lies outside [0, 1]")]
    OutOfRange(f64),
    #[error(transparent)]
    Integration(#[from] OdeError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Discretisation settings for [`solve_emden`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmdenConfig {
    /// Number of uniform radial intervals in the table (rounded up to even).
    pub samples: usize,
    /// Starting radius of the shooting integration.
    pub h0: f64,
    /// Shooting gives up if no zero is found before this radius.
    pub r_max: f64,
}

impl Default for EmdenConfig {
    fn default() -> Self {
        Self { samples: 100_000, h0: 1e-6, r_max: 1e3 }
    }
}

/// One row of the radial table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSample {
    pub r: f64,
    pub phi: f64,
    pub dphi: f64,
}

/// Scalar summary of an Emden solution, as emitted by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmdenSummary {
    pub p: f64,
    pub phi0: f64,
    pub dphi1: f64,
    #[serde(rename = "I_pm1")]
    pub i_pm1: f64,
    #[serde(rename = "I_p")]
    pub i_p: f64,
    #[serde(rename = "I_pp1")]
    pub i_pp1: f64,
    pub tol: f64,
}

/// The Emden profile with its radial table and `(p+k)`-integrals.
#[derive(Debug, Clone)]
pub struct EmdenSolution {
    pub p: f64,
    pub radial_table: Vec<RadialSample>,
    pub phi0: f64,
    pub dphi1: f64,
    pub i_pm1: f64,
    pub i_p: f64,
    pub i_pp1: f64,
    /// Achieved tolerance: the larger of the integrator tolerance and the
    /// boundary residual `|φ(1)|/φ(0)`.
    pub tol: f64,
    /// First zero of the `u(0) = 1` shooting solution.
    pub r0: f64,
    /// `max |−Δ_h φ − φ^p| / h²` over interior samples of the residual grid.
    pub residual_constant: f64,
    /// Spacing of the residual grid used for `residual_constant`.
    pub residual_spacing: f64,
}

/// Truncated series of the shooting solution about the origin.
fn series(p: f64, r: f64) -> [f64; 2] {
    let r2 = r * r;
    let c4 = p / 64.0;
    let c6 = -p * (3.0 * p - 2.0) / 2304.0;
    let u = 1.0 - r2 / 4.0 + c4 * r2 * r2 + c6 * r2 * r2 * r2;
    let du = -r / 2.0 + 4.0 * c4 * r2 * r + 6.0 * c6 * r2 * r2 * r;
    [u, du]
}

/// Solves the unit-disk Emden problem with default discretisation.
pub fn solve_emden(p: f64, tol: f64) -> Result<EmdenSolution, EmdenError> {
    solve_emden_with(p, tol, &EmdenConfig::default())
}

pub fn solve_emden_with(p: f64, tol: f64, cfg: &EmdenConfig) -> Result<EmdenSolution, EmdenError> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(EmdenError::InvalidExponent(p));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(EmdenError::InvalidTolerance(tol));
    }
    if cfg.samples < 8 || !(cfg.h0 > 0.0) || !(cfg.r_max > cfg.h0) {
        return Err(EmdenError::InvalidConfig(format!("{cfg:?}")));
    }
    let rtol = (tol * 1e-3).max(1e-14);
    let dp = Dopri5::new(rtol, rtol * 1e-2);
    let rhs = |r: f64, y: &[f64; 2]| [y[1], -y[1] / r - y[0].max(0.0).powf(p)];

    // Bracket the first zero with coarse steps.
    let mut r = cfg.h0;
    let mut y = series(p, r);
    let mut h = 1e-3;
    let coarse = 0.05;
    let (mut lo, mut y_lo, hi) = loop {
        let r_next = (r + coarse).min(cfg.r_max);
        let y_next = dp.integrate(&rhs, r, y, r_next, &mut h)?;
        if y_next[0] <= 0.0 {
            break (r, y, r_next);
        }
        if r_next >= cfg.r_max {
            return Err(EmdenError::NoZeroFound { r_max: cfg.r_max });
        }
        r = r_next;
        y = y_next;
    };

    // Safeguarded Newton from the left end; the profile is convex near its
    // zero so tangent steps stay inside the bracket.
    let mut hi = hi;
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi || y_lo[0] == 0.0 {
            break;
        }
        let newton = lo - y_lo[0] / y_lo[1];
        let mid = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let mut hs = (mid - lo).abs();
        let y_mid = dp.integrate(&rhs, lo, y_lo, mid, &mut hs)?;
        if y_mid[0] > 0.0 {
            if (mid - lo) <= 4.0 * f64::EPSILON * mid {
                break;
            }
            lo = mid;
            y_lo = y_mid;
        } else {
            hi = mid;
        }
        if y_lo[0].abs() < 1e-16 {
            break;
        }
    }
    let r0 = lo - y_lo[0] / y_lo[1];

    // Radial table on [0, 1].
    let n = cfg.samples + cfg.samples % 2;
    let amp = r0.powf(2.0 / (p - 1.0));
    let mut table = Vec::with_capacity(n + 1);
    let mut rr = cfg.h0;
    let mut yy = series(p, rr);
    let mut hstep = r0 / n as f64;
    for i in 0..=n {
        let rho = r0 * i as f64 / n as f64;
        let uy = if i == 0 {
            [1.0, 0.0]
        } else if rho <= cfg.h0 {
            series(p, rho)
        } else {
            yy = dp.integrate(&rhs, rr, yy, rho, &mut hstep)?;
            rr = rho;
            yy
        };
        table.push(RadialSample { r: i as f64 / n as f64, phi: amp * uy[0], dphi: amp * r0 * uy[1] });
    }
    for w in table.windows(2) {
        if !(w[1].phi < w[0].phi) {
            return Err(EmdenError::NonMonotone { r: w[1].r });
        }
    }

    let phi0 = table[0].phi;
    let dphi1 = table[n].dphi;
    let hr = 1.0 / n as f64;
    let mass = |q: f64| -> Result<f64, EmdenError> {
        let y: Vec<f64> = table.iter().map(|s| s.phi.max(0.0).powf(q) * s.r).collect();
        Ok(2.0 * PI * simpson(&y, hr)?)
    };
    let i_pm1 = mass(p - 1.0)?;
    let i_p = mass(p)?;
    let i_pp1 = mass(p + 1.0)?;

    let mut sol = EmdenSolution {
        p,
        phi0,
        dphi1,
        i_pm1,
        i_p,
        i_pp1,
        tol: rtol.max(table[n].phi.abs() / phi0),
        r0,
        residual_constant: 0.0,
        residual_spacing: 0.0,
        radial_table: table,
    };
    // Sub-sample so that truncation, not roundoff, dominates the check.
    let stride = (n / 1000).max(1);
    let (c, hc) = sol.radial_residual_constant(stride);
    sol.residual_constant = c;
    sol.residual_spacing = hc;
    Ok(sol)
}

impl EmdenSolution {
    pub fn summary(&self) -> EmdenSummary {
        EmdenSummary {
            p: self.p,
            phi0: self.phi0,
            dphi1: self.dphi1,
            i_pm1: self.i_pm1,
            i_p: self.i_p,
            i_pp1: self.i_pp1,
            tol: self.tol,
        }
    }

    fn spacing(&self) -> f64 {
        1.0 / (self.radial_table.len() - 1) as f64
    }

    /// `2π ∫₀¹ φ^q r dr` by Simpson on the table, for `q > 0`.
    pub fn mass(&self, q: f64) -> f64 {
        let y: Vec<f64> = self.radial_table.iter().map(|s| s.phi.max(0.0).powf(q) * s.r).collect();
        2.0 * PI * simpson(&y, self.spacing()).expect("table has an odd sample count")
    }

    /// `max |−Δ_h φ − φ^p| / h²` for the radial 3-point Laplacian built from
    /// every `stride`-th table entry, together with that spacing `h`.
    pub fn radial_residual_constant(&self, stride: usize) -> (f64, f64) {
        let pts: Vec<&RadialSample> = self.radial_table.iter().step_by(stride.max(1)).collect();
        let h = pts[1].r - pts[0].r;
        let mut worst: f64 = 0.0;
        for k in 1..pts.len() - 1 {
            let (a, b, c) = (pts[k - 1], pts[k], pts[k + 1]);
            let lap = (c.phi - 2.0 * b.phi + a.phi) / (h * h) + (c.phi - a.phi) / (2.0 * h * b.r);
            let res = -lap - b.phi.max(0.0).powf(self.p);
            worst = worst.max(res.abs());
        }
        (worst / (h * h), h)
    }

    fn locate(&self, r: f64) -> Result<(usize, f64), EmdenError> {
        if !(0.0..=1.0).contains(&r) {
            return Err(EmdenError::OutOfRange(r));
        }
        let n = self.radial_table.len() - 1;
        let x = r * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        Ok((i, x - i as f64))
    }

    /// `φ(r)` by clamped cubic Hermite interpolation of the table.
    pub fn eval_phi(&self, r: f64) -> Result<f64, EmdenError> {
        let (i, t) = self.locate(r)?;
        let h = self.spacing();
        let (a, b) = (&self.radial_table[i], &self.radial_table[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * a.phi
            + (t3 - 2.0 * t2 + t) * h * a.dphi
            + (-2.0 * t3 + 3.0 * t2) * b.phi
            + (t3 - t2) * h * b.dphi;
        Ok(v.clamp(b.phi, a.phi))
    }

    /// `φ'(r)` from the derivative of the Hermite interpolant.
    pub fn eval_dphi(&self, r: f64) -> Result<f64, EmdenError> {
        let (i, t) = self.locate(r)?;
        let h = self.spacing();
        let (a, b) = (&self.radial_table[i], &self.radial_table[i + 1]);
        let t2 = t * t;
        let d = (6.0 * t2 - 6.0 * t) * a.phi / h
            + (3.0 * t2 - 4.0 * t + 1.0) * a.dphi
            + (-6.0 * t2 + 6.0 * t) * b.phi / h
            + (3.0 * t2 - 2.0 * t) * b.dphi;
        Ok(d.min(0.0))
    }

    /// `φ''(r)` from the equation itself.
    pub fn eval_d2phi(&self, r: f64) -> Result<f64, EmdenError> {
        if r == 0.0 {
            return Ok(-0.5 * self.phi0.powf(self.p));
        }
        let phi = self.eval_phi(r)?;
        let dphi = self.eval_dphi(r)?;
        Ok(-dphi / r - phi.max(0.0).powf(self.p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(solve_emden(1.0, 1e-8), Err(EmdenError::InvalidExponent(_))));
        assert!(matches!(solve_emden(2.0, 0.0), Err(EmdenError::InvalidTolerance(_))));
        let cfg = EmdenConfig { r_max: 1.0, ..Default::default() };
        assert!(matches!(solve_emden_with(2.0, 1e-8, &cfg), Err(EmdenError::NoZeroFound { .. })));
    }

    #[test]
    fn series_curvature_at_origin() {
        let h = 1e-3;
        let u = series(2.0, h)[0];
        let second = 2.0 * (u - 1.0) / (h * h);
        assert!((second + 0.5).abs() < 1e-5);
    }

    #[test]
    fn boundary_values_and_interpolation() {
        let cfg = EmdenConfig { samples: 4000, ..Default::default() };
        let sol = solve_emden_with(2.0, 1e-10, &cfg).unwrap();
        assert!(sol.eval_phi(1.0).unwrap().abs() < 1e-9);
        assert_eq!(sol.eval_phi(0.0).unwrap(), sol.phi0);
        let mid = sol.eval_phi(0.5).unwrap();
        assert!(mid > 0.0 && mid < sol.phi0);
        assert!(sol.eval_phi(1.5).is_err());
        assert!(sol.radial_table[0].dphi.abs() < 1e-12);
    }

    #[test]
    fn derivative_interpolant_agrees_with_table() {
        let cfg = EmdenConfig { samples: 2000, ..Default::default() };
        let sol = solve_emden_with(3.0, 1e-10, &cfg).unwrap();
        for s in sol.radial_table.iter().step_by(97) {
            let d = sol.eval_dphi(s.r).unwrap();
            assert!((d - s.dphi).abs() < 1e-9 * (1.0 + s.dphi.abs()));
        }
    }
}
