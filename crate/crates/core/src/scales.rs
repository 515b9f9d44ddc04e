//! The refined length scale `s` and amplification `θ` attached to `ε`.
//!
//! `s` solves `(ε/s)^{2/(p-1)} φ'(1) ln(√π s) = 1` and `θ = φ'(1) ln(√π s)`.
//! The same matching equation with right side `a − b` fixes the radius of a
//! Dancer–Yan profile, so both go through [`solve_matching`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SQRT_PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no root of the scale relation in (e^{lo}, e^{hi}); log-residuals {f_lo} and {f_hi}")]
    NoRootInRange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub eps: f64,
    pub s: f64,
    pub theta: f64,
    pub dphi1: f64,
    pub p: f64,
}

impl ScaleParams {
    /// `(ε/s)^{2/(p-1)} θ − 1`.
    pub fn root_residual(&self) -> f64 {
        (self.eps / self.s).powf(2.0 / (self.p - 1.0)) * self.theta - 1.0
    }

    /// Relative defect of `ε² = s²/θ^{p-1}`.
    pub fn identity_defect(&self) -> f64 {
        let rhs = self.s * self.s / self.theta.powf(self.p - 1.0);
        (self.eps * self.eps - rhs).abs() / (self.eps * self.eps)
    }
}

/// Log-form of the matching equation in `x = ln s`; strictly decreasing.
fn log_residual(x: f64, eps: f64, dphi1: f64, p: f64, jump: f64) -> f64 {
    let k = 2.0 / (p - 1.0);
    let dist = -SQRT_PI.ln() - x;
    k * (eps.ln() - x) + (-dphi1).ln() + dist.ln() - jump.ln()
}

/// Solves `(ε/s)^{2/(p-1)} φ'(1) ln(√π s) = jump` for `s ∈ (0, 1/√π)` by
/// bisection in `ln s`. The left side is strictly monotone in `s`, so the
/// root is unique whenever it exists.
pub fn solve_matching(eps: f64, dphi1: f64, p: f64, jump: f64, tol: f64) -> Result<f64, ScaleError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(ScaleError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if !(dphi1 < 0.0) || !dphi1.is_finite() {
        return Err(ScaleError::InvalidInput(format!("dphi1 must be negative, got {dphi1}")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(ScaleError::InvalidInput(format!("p must exceed 1, got {p}")));
    }
    if !(jump > 0.0) || !jump.is_finite() {
        return Err(ScaleError::InvalidInput(format!("jump must be positive, got {jump}")));
    }
    if !(tol > 0.0) {
        return Err(ScaleError::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    let f = |x: f64| log_residual(x, eps, dphi1, p, jump);
    let x_max = -SQRT_PI.ln();
    let mut hi = x_max;
    let mut lo = eps.ln().min(x_max - 1.0);
    let mut f_lo = f(lo);
    let mut width = 1.0;
    let mut expansions = 0;
    while !(f_lo > 0.0) {
        if expansions > 200 || !f_lo.is_finite() {
            return Err(ScaleError::NoRootInRange { lo, hi, f_lo, f_hi: f64::NEG_INFINITY });
        }
        hi = lo;
        width *= 2.0;
        lo -= width;
        f_lo = f(lo);
        expansions += 1;
    }
    // Bisection to machine resolution; `|f|` bounds the relative root residual.
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (x, fx) = if f(lo).abs() < f(hi).abs() { (lo, f(lo)) } else { (hi, f(hi)) };
    if !(fx.abs() <= tol.max(1e-13)) {
        return Err(ScaleError::NoRootInRange { lo, hi, f_lo: f(lo), f_hi: f(hi) });
    }
    Ok(x.exp())
}

/// Solves the scale relation for `ε`.
pub fn solve_scale(eps: f64, dphi1: f64, p: f64, tol: f64) -> Result<ScaleParams, ScaleError> {
    let s = solve_matching(eps, dphi1, p, 1.0, tol)?;
    let theta = dphi1 * (SQRT_PI * s).ln();
    Ok(ScaleParams { eps, s, theta, dphi1, p })
}
