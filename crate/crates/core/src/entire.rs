//! Finite-mass entire solutions of `-Δw = [w]_+^p` in the plane, the
//! rescaling `ℛ_t w(x) = t^{2/(p-1)} w(tx)`, and the one-dimensional
//! infinite-mass family.

use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

use crate::emden::{EmdenError, EmdenSolution};
use crate::ode::{Dopri5, OdeError};
use crate::quadrature::{gauss_kronrod, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntireError {
    #[error("Emden table has p = {table}, expected p = {expected}")]
    MismatchedExponent { expected: f64, table: f64 },
    #[error("scale must be positive, got {0}")]
    NonpositiveScale(f64),
    #[error("radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular-endpoint quadrature failed: {0}")]
    QuadratureFailure(#[from] QuadratureError),
    #[error(transparent)]
    Emden(#[from] EmdenError),
    #[error(transparent)]
    Integration(#[from] OdeError),
}

/// Radial entire solution with free-boundary radius `r_p`: the Emden
/// profile inside, a logarithmic harmonic shell outside.
#[derive(Debug, Clone)]
pub struct EntireSolution {
    pub emden: Arc<EmdenSolution>,
    pub r_p: f64,
    /// Decay coefficient `-φ'(1)/R^{2/(p-1)}`.
    pub beta_p: f64,
}

/// `(β_{p-1}, β_p, β_{p+1})`, the normalised plane masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntireMasses {
    pub beta_pm1: f64,
    pub beta_p: f64,
    pub beta_pp1: f64,
}

impl EntireSolution {
    pub fn new(emden: Arc<EmdenSolution>, r_p: f64) -> Result<Self, EntireError> {
        if !(r_p > 0.0) || !r_p.is_finite() {
            return Err(EntireError::NonpositiveRadius(r_p));
        }
        let k = 2.0 / (emden.p - 1.0);
        let beta_p = -emden.dphi1 / r_p.powf(k);
        Ok(Self { emden, r_p, beta_p })
    }

    /// Like [`EntireSolution::new`] but checks the table exponent.
    pub fn with_exponent(p: f64, emden: Arc<EmdenSolution>, r_p: f64) -> Result<Self, EntireError> {
        if (emden.p - p).abs() > 1e-12 * p {
            return Err(EntireError::MismatchedExponent { expected: p, table: emden.p });
        }
        Self::new(emden, r_p)
    }

    /// The solution with unit free-boundary radius.
    pub fn w_star(emden: Arc<EmdenSolution>) -> Self {
        Self::new(emden, 1.0).expect("unit radius is valid")
    }

    pub fn p(&self) -> f64 {
        self.emden.p
    }

    fn amplitude(&self) -> f64 {
        self.r_p.powf(-2.0 / (self.p() - 1.0))
    }

    /// `w` as a function of `|x|`.
    pub fn eval_radial(&self, rho: f64) -> f64 {
        let rho = rho.abs();
        let amp = self.amplitude();
        if rho <= self.r_p {
            amp * self.emden.eval_phi(rho / self.r_p).expect("radius inside table")
        } else {
            amp * self.emden.dphi1 * (rho / self.r_p).ln()
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.eval_radial(x[0].hypot(x[1]))
    }

    /// Radial derivative; `outer` selects the one-sided limit at `r_p`.
    pub fn radial_derivative(&self, rho: f64, outer: bool) -> f64 {
        let amp = self.amplitude();
        if rho < self.r_p || (rho == self.r_p && !outer) {
            amp / self.r_p * self.emden.eval_dphi(rho / self.r_p).expect("radius inside table")
        } else {
            amp * self.emden.dphi1 / rho
        }
    }

    /// `ℛ_t w`, equivalently the solution with radius `r_p / t`.
    pub fn rescale(&self, t: f64) -> Result<Self, EntireError> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(EntireError::NonpositiveScale(t));
        }
        Self::new(self.emden.clone(), self.r_p / t)
    }

    /// Closed-form plane masses from the Emden integrals.
    pub fn masses(&self) -> EntireMasses {
        let k = 2.0 / (self.p() - 1.0);
        let e = &self.emden;
        EntireMasses {
            beta_pm1: e.i_pm1 / (2.0 * PI),
            beta_p: e.i_p / (2.0 * PI * self.r_p.powf(k)),
            beta_pp1: e.i_pp1 / (2.0 * PI * self.r_p.powf(2.0 * k)),
        }
    }

    /// `(1/2π) ∫ [w]_+^q` by adaptive quadrature of the interpolated
    /// profile; an independent route to [`EntireSolution::masses`].
    pub fn mass_by_quadrature(&self, q: f64, tol: f64) -> Result<f64, EntireError> {
        let (v, _) = gauss_kronrod(|rho| self.eval_radial(rho).max(0.0).powf(q) * rho, 0.0, self.r_p, tol, tol, 2000)?;
        Ok(v)
    }
}

/// Even solution of `-u'' = [u]_+^p` on the line with `u(0) = a`.
#[derive(Debug, Clone)]
pub struct OneDimSolution {
    pub p: f64,
    pub a: f64,
    /// Half-width of the positive part.
    pub t0: f64,
    /// Orientation of the planar lift.
    pub angle: f64,
    /// Samples `(t, u, u')` on `[0, t0]`, uniform in `t`.
    pub table: Vec<[f64; 3]>,
    /// Quadrature error estimate of `t0`.
    pub t0_error: f64,
}

const ONEDIM_SAMPLES: usize = 4000;

/// `∫₀ᵃ ds/√(a^{p+1} − s^{p+1})` with the endpoint singularity removed by
/// `s = a(1 − u²)`. Returns `(value, error_estimate)`.
pub fn onedim_integral(p: f64, a: f64, tol: f64) -> Result<(f64, f64), QuadratureError> {
    let q = p + 1.0;
    let scale = 2.0 * a / a.powf(q / 2.0);
    let limit = scale / q.sqrt();
    let f = move |u: f64| {
        if u == 0.0 {
            return limit;
        }
        // 1 − (1 − u²)^{p+1}, accurate for small u.
        let g = -(q * (-u * u).ln_1p()).exp_m1();
        scale * u / g.sqrt()
    };
    gauss_kronrod(f, 0.0, 1.0, tol, tol, 1000)
}

/// Builds the one-dimensional solution with peak `a`.
pub fn solve_onedim(p: f64, a: f64, tol: f64) -> Result<OneDimSolution, EntireError> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(EntireError::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(EntireError::InvalidParameter(format!("a must be positive, got {a}")));
    }
    if !(tol > 0.0) {
        return Err(EntireError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let (integral, err) = onedim_integral(p, a, tol * 1e-2)?;
    let factor = ((p + 1.0) / 2.0).sqrt();
    let t0 = integral * factor;

    let rtol = (tol * 1e-3).max(1e-14);
    let dp = Dopri5::new(rtol, rtol * 1e-2 * a.max(1e-300));
    let rhs = |_t: f64, y: &[f64; 2]| [y[1], -y[0].max(0.0).powf(p)];
    let mut table = Vec::with_capacity(ONEDIM_SAMPLES + 1);
    let mut y = [a, 0.0];
    let mut t = 0.0;
    let mut h = t0 / ONEDIM_SAMPLES as f64;
    table.push([0.0, a, 0.0]);
    for i in 1..=ONEDIM_SAMPLES {
        let ti = t0 * i as f64 / ONEDIM_SAMPLES as f64;
        y = dp.integrate(&rhs, t, y, ti, &mut h)?;
        t = ti;
        table.push([ti, y[0], y[1]]);
    }
    Ok(OneDimSolution { p, a, t0, angle: 0.0, table, t0_error: err * factor })
}

impl OneDimSolution {
    /// Sets the orientation of the planar lift.
    pub fn with_angle(mut self, angle: f64) -> Self {
        self.angle = angle;
        self
    }

    /// `u'(t0)` from the first integral.
    pub fn tail_slope(&self) -> f64 {
        -(2.0 / (self.p + 1.0)).sqrt() * self.a.powf((self.p + 1.0) / 2.0)
    }

    /// `u(t)` on the whole line.
    pub fn eval(&self, t: f64) -> f64 {
        let s = t.abs();
        if s >= self.t0 {
            return self.tail_slope() * (s - self.t0);
        }
        let n = self.table.len() - 1;
        let h = self.t0 / n as f64;
        let x = s / h;
        let i = (x.floor() as usize).min(n - 1);
        let w = x - i as f64;
        let (l, r) = (self.table[i], self.table[i + 1]);
        let w2 = w * w;
        let w3 = w2 * w;
        (2.0 * w3 - 3.0 * w2 + 1.0) * l[1]
            + (w3 - 2.0 * w2 + w) * h * l[2]
            + (-2.0 * w3 + 3.0 * w2) * r[1]
            + (w3 - w2) * h * r[2]
    }

    /// `u'(t)` on the whole line (odd).
    pub fn eval_derivative(&self, t: f64) -> f64 {
        let s = t.abs();
        let sign = if t < 0.0 { -1.0 } else { 1.0 };
        if s >= self.t0 {
            return sign * self.tail_slope();
        }
        let n = self.table.len() - 1;
        let h = self.t0 / n as f64;
        let x = s / h;
        let i = (x.floor() as usize).min(n - 1);
        let w = x - i as f64;
        let (l, r) = (self.table[i], self.table[i + 1]);
        let w2 = w * w;
        let d = (6.0 * w2 - 6.0 * w) * l[1] / h
            + (3.0 * w2 - 4.0 * w + 1.0) * l[2]
            + (-6.0 * w2 + 6.0 * w) * r[1] / h
            + (3.0 * w2 - 2.0 * w) * r[2];
        sign * d
    }

    /// Planar lift `x ↦ u(x · e_angle)`.
    pub fn lift(&self, x: [f64; 2]) -> f64 {
        self.eval(x[0] * self.angle.cos() + x[1] * self.angle.sin())
    }

    /// Largest violation of `u'² = (2/(p+1))(a^{p+1} − u^{p+1})` over the table.
    pub fn first_integral_defect(&self) -> f64 {
        let q = self.p + 1.0;
        self.table
            .iter()
            .map(|s| (s[2] * s[2] - 2.0 / q * (self.a.powf(q) - s[1].max(0.0).powf(q))).abs())
            .fold(0.0, f64::max)
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
    fn w_star_values() {
        let e = emden(2.0);
        let w = EntireSolution::w_star(e.clone());
        assert_eq!(w.eval([0.0, 0.0]), e.phi0);
        assert!(w.eval([1.0, 0.0]).abs() < 1e-9);
        let w2 = EntireSolution::new(e.clone(), 2.0).unwrap();
        assert!((w2.eval([0.0, 0.0]) - e.phi0 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn exponent_and_scale_checks() {
        let e = emden(2.0);
        assert!(matches!(
            EntireSolution::with_exponent(3.0, e.clone(), 1.0),
            Err(EntireError::MismatchedExponent { .. })
        ));
        let w = EntireSolution::w_star(e);
        assert!(matches!(w.rescale(0.0), Err(EntireError::NonpositiveScale(_))));
        assert!(matches!(w.rescale(-1.0), Err(EntireError::NonpositiveScale(_))));
    }

    #[test]
    fn one_sided_derivatives_match() {
        let w = EntireSolution::new(emden(3.0), 1.7).unwrap();
        let inner = w.radial_derivative(1.7, false);
        let outer = w.radial_derivative(1.7, true);
        assert!((inner - outer).abs() < 1e-9 * outer.abs());
    }

    #[test]
    fn onedim_tail_slope_p3() {
        let s = solve_onedim(3.0, 1.0, 1e-12).unwrap();
        assert!((s.tail_slope() + 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.eval_derivative(0.0), 0.0);
        // The ODE's zero lands at the quadrature t0.
        let last = s.table.last().unwrap();
        assert!(last[1].abs() < 1e-9);
        assert!((last[2] - s.tail_slope()).abs() < 1e-9);
    }
}
