//! Dancer–Yan model spikes on the disk of unit area.
//!
//! `U = a + X φ(|x|/s)` for `|x| < s` and `U = a + (a−b) ln(|x|/s)/ln(√π s)`
//! outside, with `X = (ε/s)^{2/(p-1)}` and `s` fixed by `C¹` matching.

use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

use crate::emden::EmdenSolution;
use crate::quadrature::{gauss_kronrod, QuadratureError};
use crate::scales::{solve_matching, ScaleError};
use crate::{SQRT_PI, UNIT_AREA_RADIUS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("levels must satisfy b < a, got a = {a}, b = {b}")]
    InvalidLevels { a: f64, b: f64 },
    #[error("mass exponent t = {t} is below (p-1)/p = {min}")]
    ExponentOutOfRange { t: f64, min: f64 },
    #[error("radius {0} lies outside the disk")]
    OutOfDomain(f64),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone)]
pub struct DyProfile {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub s_eps: f64,
    pub emden: Arc<EmdenSolution>,
    /// Outer radius, `1/√π`.
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileMasses {
    pub pm1: f64,
    pub p: f64,
    pub pp1: f64,
}

/// Parameters recovered from the integral constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintParameters {
    pub alpha_abs: f64,
    pub lambda: f64,
    /// `ε^p |α|^{p(p-1)/2} I_p^{(p-1)/2}`, the eliminated closed form of `s`.
    pub s_closed_form: f64,
    /// The same expression with `I_p^{p-1}`; kept only to quantify the
    /// mismatch with that variant of the formula.
    pub s_variant: f64,
}

/// Builds the profile; `s` is found with the shared scale root-finder.
pub fn build_profile(emden: Arc<EmdenSolution>, eps: f64, a: f64, b: f64, tol: f64) -> Result<DyProfile, ProfileError> {
    if !(b < a) || !a.is_finite() || !b.is_finite() {
        return Err(ProfileError::InvalidLevels { a, b });
    }
    let s_eps = solve_matching(eps, emden.dphi1, emden.p, a - b, tol)?;
    Ok(DyProfile { p: emden.p, a, b, eps, s_eps, emden, r2: UNIT_AREA_RADIUS })
}

impl DyProfile {
    /// Inner amplitude `X = (ε/s)^{2/(p-1)} = (a−b)/(φ'(1) ln √π s)`.
    pub fn amplitude(&self) -> f64 {
        (self.eps / self.s_eps).powf(2.0 / (self.p - 1.0))
    }

    /// `θ = φ'(1) ln(√π s)` for this profile's radius.
    pub fn theta(&self) -> f64 {
        self.emden.dphi1 * (SQRT_PI * self.s_eps).ln()
    }

    /// Relative defect of the `C¹` matching condition.
    pub fn matching_defect(&self) -> f64 {
        let lhs = self.amplitude() * self.emden.dphi1;
        let rhs = (self.a - self.b) / (SQRT_PI * self.s_eps).ln();
        (lhs - rhs).abs() / rhs.abs()
    }

    pub fn eval_radial(&self, r: f64) -> Result<f64, ProfileError> {
        let r = r.abs();
        if r > self.r2 * (1.0 + 1e-12) {
            return Err(ProfileError::OutOfDomain(r));
        }
        Ok(self.eval_radial_unchecked(r))
    }

    fn eval_radial_unchecked(&self, r: f64) -> f64 {
        if r < self.s_eps {
            self.a + self.amplitude() * self.emden.eval_phi(r / self.s_eps).expect("inside table")
        } else {
            self.a + (self.a - self.b) * (r / self.s_eps).ln() / (SQRT_PI * self.s_eps).ln()
        }
    }

    /// `U(x)`; points outside the disk return the boundary level's harmonic
    /// continuation, so callers on a grid should mask them.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.eval_radial_unchecked(x[0].hypot(x[1]))
    }

    /// Radial derivative; `outer` picks the one-sided limit at `s_ε`.
    pub fn radial_derivative(&self, r: f64, outer: bool) -> f64 {
        if r < self.s_eps || (r == self.s_eps && !outer) {
            self.amplitude() / self.s_eps * self.emden.eval_dphi(r / self.s_eps).expect("inside table")
        } else {
            (self.a - self.b) / (r * (SQRT_PI * self.s_eps).ln())
        }
    }

    /// `(1/ε²) ∫ ([U−a]_+^p)^t` in closed form.
    pub fn mass(&self, t: f64) -> Result<f64, ProfileError> {
        let min = (self.p - 1.0) / self.p;
        if !(t >= min - 1e-15) {
            return Err(ProfileError::ExponentOutOfRange { t, min });
        }
        let q = self.p * t;
        let ipt = self.cached_integral(q).unwrap_or_else(|| self.emden.mass(q));
        Ok(self.amplitude().powf(self.p * (t - 1.0) + 1.0) * ipt)
    }

    fn cached_integral(&self, q: f64) -> Option<f64> {
        let e = &self.emden;
        let close = |x: f64| (q - x).abs() <= 1e-14 * x.abs().max(1.0);
        if close(e.p - 1.0) {
            Some(e.i_pm1)
        } else if close(e.p) {
            Some(e.i_p)
        } else if close(e.p + 1.0) {
            Some(e.i_pp1)
        } else {
            None
        }
    }

    pub fn masses(&self) -> ProfileMasses {
        let p = self.p;
        ProfileMasses {
            pm1: self.mass((p - 1.0) / p).expect("valid exponent"),
            p: self.mass(1.0).expect("valid exponent"),
            pp1: self.mass((p + 1.0) / p).expect("valid exponent"),
        }
    }

    /// `(1/ε²) ∫ [U−a]_+^q` by adaptive quadrature of the evaluated profile,
    /// independent of the closed-form scaling.
    pub fn mass_by_quadrature(&self, q: f64, tol: f64) -> Result<f64, ProfileError> {
        let s = self.s_eps;
        let (v, _) = gauss_kronrod(
            |rho| (self.eval_radial_unchecked(s * rho) - self.a).max(0.0).powf(q) * rho,
            0.0,
            1.0,
            tol,
            tol,
            4000,
        )?;
        Ok(2.0 * PI * s * s * v / (self.eps * self.eps))
    }

    /// `(|α|, λ)` from the integral constraint plus the closed-form check of `s`.
    pub fn constraint_parameters(&self) -> ConstraintParameters {
        let p = self.p;
        let ip = self.emden.i_p;
        let x = self.amplitude();
        let inv = x.powf(p) * self.s_eps * self.s_eps * ip;
        let alpha_abs = inv.powf(-1.0 / p);
        let lambda = 1.0 / (self.eps * self.eps * alpha_abs.powf(p - 1.0));
        let core = self.eps.powf(p) * alpha_abs.powf(p * (p - 1.0) / 2.0);
        ConstraintParameters {
            alpha_abs,
            lambda,
            s_closed_form: core * ip.powf((p - 1.0) / 2.0),
            s_variant: core * ip.powf(p - 1.0),
        }
    }

    /// Max of `|−Δ_h U − ε^{-2}[U−a]_+^p|` on the polar nodes `r_i = i·h`,
    /// `h = min(r₂, 4s)/n`, with the radial Laplacian `U'' + U'/r` by central
    /// differences. Nodes within `2h` of the matching circle are skipped.
    pub fn radial_residual(&self, n: usize) -> f64 {
        let h = self.r2.min(4.0 * self.s_eps) / n as f64;
        let u = |i: usize| self.eval_radial_unchecked(i as f64 * h);
        let src = |x: f64| (x - self.a).max(0.0).powf(self.p) / (self.eps * self.eps);
        let mut worst = (4.0 * (u(0) - u(1)) / (h * h) - src(u(0))).abs();
        for i in 1..n {
            let r = i as f64 * h;
            if (r - self.s_eps).abs() < 2.0 * h {
                continue;
            }
            let (um, u0, up) = (u(i - 1), u(i), u(i + 1));
            let lap = (up - 2.0 * u0 + um) / (h * h) + (up - um) / (2.0 * h * r);
            worst = worst.max((-lap - src(u0)).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emden::{solve_emden_with, EmdenConfig};

    fn emden(p: f64) -> Arc<EmdenSolution> {
        let cfg = EmdenConfig { samples: 4000, ..Default::default() };
        Arc::new(solve_emden_with(p, 1e-10, &cfg).unwrap())
    }

    #[test]
    fn levels_validated() {
        let e = emden(2.0);
        assert!(matches!(build_profile(e.clone(), 0.05, 1.0, 1.0, 1e-12), Err(ProfileError::InvalidLevels { .. })));
        assert!(matches!(build_profile(e, 0.05, 0.0, 1.0, 1e-12), Err(ProfileError::InvalidLevels { .. })));
    }

    #[test]
    fn boundary_and_peak_values() {
        let prof = build_profile(emden(2.0), 0.05, 1.0, 0.0, 1e-12).unwrap();
        assert!(prof.eval_radial(UNIT_AREA_RADIUS).unwrap().abs() < 1e-12);
        assert!(prof.eval([0.0, 0.0]) > 1.0);
        assert!(prof.matching_defect() < 1e-12);
        let jump = prof.radial_derivative(prof.s_eps, true) - prof.radial_derivative(prof.s_eps, false);
        assert!(jump.abs() < 1e-8 * prof.radial_derivative(prof.s_eps, true).abs());
        assert!(prof.eval_radial(1.0).is_err());
    }

    #[test]
    fn exponent_guard() {
        let prof = build_profile(emden(3.0), 0.05, 1.0, 0.0, 1e-12).unwrap();
        assert!(matches!(prof.mass(0.5), Err(ProfileError::ExponentOutOfRange { .. })));
        assert_eq!(prof.mass(2.0 / 3.0).unwrap(), prof.emden.i_pm1);
    }

    #[test]
    fn lambda_definition() {
        let prof = build_profile(emden(2.0), 0.03, 1.0, 0.0, 1e-12).unwrap();
        let c = prof.constraint_parameters();
        let one = prof.eps * prof.eps * c.alpha_abs.powf(prof.p - 1.0) * c.lambda;
        assert!((one - 1.0).abs() < 1e-14);
    }
}
