//! Dirichlet Green functions of `-Δ` on a centred disk and on a rectangle,
//! and the Kirchhoff–Routh Hamiltonian built from them.
//!
//! On the rectangle the Green function is a sine series along the shorter
//! side. Its logarithmic part sums in closed form,
//! `Σ e^{-mβ} cos(mθ)/m = -½ L(β, θ)` with
//! `L(β, θ) = ln((1 - e^{-β})² + 4 e^{-β} sin²(θ/2))`, which leaves a
//! remainder decaying like `e^{-2πmB/A}`.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::grid::Shape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("Green function is singular at coincident points ({0}, {1})")]
    CoincidentPoints(f64, f64),
    #[error("point ({0}, {1}) is not interior")]
    ExteriorPoint(f64, f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("critical-point search stalled after {iterations} iterations (|grad| = {grad_norm})")]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("points {i} and {j} came within {distance} of each other")]
    CollisionDetected { i: usize, j: usize, distance: f64 },
    #[error("point {i} reached the boundary strip (distance {distance})")]
    BoundaryEscape { i: usize, distance: f64 },
}

/// Rectangle data in the rotated frame `(ξ, η)`, `ξ` along the short side.
#[derive(Debug, Clone, Copy)]
struct RectFrame {
    /// Long side.
    b: f64,
    /// Whether `x` is the long direction.
    swapped: bool,
    kappa: f64,
    q: f64,
    terms: usize,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Disk { radius: f64 },
    Rect(RectFrame),
}

/// Green function of a disk or rectangle.
#[derive(Debug, Clone, Copy)]
pub struct GreenFn {
    pub shape: Shape,
    kind: Kind,
}

/// `ln((1-e^{-β})² + 4 e^{-β} sin²(θ/2))` with its partial derivatives.
fn log_kernel(beta: f64, theta: f64) -> (f64, f64, f64) {
    let e = (-beta).exp();
    let one_minus = -(-beta).exp_m1();
    let s = (0.5 * theta).sin();
    let d = one_minus * one_minus + 4.0 * e * s * s;
    let l_beta = 2.0 * e * (theta.cos() - e) / d;
    let l_theta = 2.0 * e * theta.sin() / d;
    (d.ln(), l_beta, l_theta)
}

fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

const SIGMA: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

impl RectFrame {
    fn new(lx: f64, ly: f64, tol: f64) -> Self {
        let swapped = lx > ly;
        let (a, b) = if swapped { (ly, lx) } else { (lx, ly) };
        let kappa = PI / a;
        let q = (-2.0 * kappa * b).exp();
        // Remainder terms are bounded by q^m/(1-q); stop when below tol.
        let terms = ((tol.ln() / q.ln()).ceil() as usize + 1).clamp(2, 400);
        Self { b, swapped, kappa, q, terms }
    }

    fn local(&self, x: [f64; 2]) -> (f64, f64) {
        if self.swapped {
            (x[1], x[0])
        } else {
            (x[0], x[1])
        }
    }

    fn global(&self, g: (f64, f64)) -> [f64; 2] {
        if self.swapped {
            [g.1, g.0]
        } else {
            [g.0, g.1]
        }
    }

    /// Exponents `β_j` and their derivatives with respect to the first `η`.
    fn betas(&self, eta: f64, eta2: f64) -> ([f64; 4], [f64; 4]) {
        let k = self.kappa;
        let d = eta - eta2;
        let sd = sgn(d);
        (
            [k * d.abs(), k * (eta + eta2), k * (2.0 * self.b - eta - eta2), k * (2.0 * self.b - d.abs())],
            [k * sd, k, -k, -k * sd],
        )
    }

    /// Remainder `Σ_m (1/mπ) sin(ma) sin(mb) S_m q^m/(1-q^m)` and its
    /// gradient in the first point.
    fn remainder(&self, a: f64, b: f64, betas: &[f64; 4], dbetas: &[f64; 4]) -> (f64, f64, f64) {
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        let mut qm = 1.0;
        for m in 1..=self.terms {
            qm *= self.q;
            let c = qm / (1.0 - qm);
            let mf = m as f64;
            let (sa, ca) = (mf * a).sin_cos();
            let sb = (mf * b).sin();
            let mut s = 0.0;
            let mut ds = 0.0;
            for j in 0..4 {
                let e = (-mf * betas[j]).exp();
                s += SIGMA[j] * e;
                ds += SIGMA[j] * dbetas[j] * e;
            }
            v += sa * sb * s * c / (mf * PI);
            gx += self.kappa / PI * ca * sb * s * c;
            gy += -sa * sb * ds * c / PI;
        }
        (v, gx, gy)
    }

    /// `G` and `∇₁G` in the frame, plus `H = G + ln|x−y|/2π`.
    fn green(&self, x: (f64, f64), y: (f64, f64)) -> (f64, f64, (f64, f64)) {
        let k = self.kappa;
        let (a, b) = (k * x.0, k * y.0);
        let (betas, dbetas) = self.betas(x.1, y.1);
        let mut g0 = 0.0;
        let mut h_part = 0.0;
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in 0..4 {
            let (lp, lp_b, lp_t) = log_kernel(betas[j], a + b);
            let (lm, lm_b, lm_t) = log_kernel(betas[j], a - b);
            g0 += SIGMA[j] * (lp - lm);
            if j > 0 {
                h_part += SIGMA[j] * (lp - lm);
            } else {
                h_part += lp;
            }
            gx += SIGMA[j] * k * (lp_t - lm_t);
            gy += SIGMA[j] * dbetas[j] * (lp_b - lm_b);
        }
        let (rem, rgx, rgy) = self.remainder(a, b, &betas, &dbetas);
        let g = g0 / (4.0 * PI) + rem;
        // Regular part: replace -L(β₁, a−b)/4π by -ln(D₁/r²)/4π.
        let r2 = (x.0 - y.0).powi(2) + (x.1 - y.1).powi(2);
        let (lm1, _, _) = log_kernel(betas[0], a - b);
        let h = (h_part - (lm1 - r2.ln())) / (4.0 * PI) + rem;
        (g, h, (gx / (4.0 * PI) + rgx, gy / (4.0 * PI) + rgy))
    }

    /// `H(q, q)` and its gradient along the diagonal.
    fn self_regular(&self, x: (f64, f64)) -> (f64, (f64, f64)) {
        let k = self.kappa;
        let a = k * x.0;
        let (betas, _) = self.betas(x.1, x.1);
        let dbetas_diag = [0.0, 2.0 * k, -2.0 * k, 0.0];
        let mut v = -(k * k).ln() + (4.0 * a.sin().powi(2)).ln();
        let mut gx = 2.0 * k * a.cos() / a.sin();
        let mut gy = 0.0;
        for j in 1..4 {
            let (lp, lp_b, lp_t) = log_kernel(betas[j], 2.0 * a);
            let l0 = log_kernel(betas[j], 0.0).0;
            let l0_b = 2.0 * (-betas[j]).exp() / (-(-betas[j]).exp_m1());
            v += SIGMA[j] * (lp - l0);
            gx += SIGMA[j] * 2.0 * k * lp_t;
            gy += SIGMA[j] * dbetas_diag[j] * (lp_b - l0_b);
        }
        let mut rem = 0.0;
        let (mut rgx, mut rgy) = (0.0, 0.0);
        let mut qm = 1.0;
        for m in 1..=self.terms {
            qm *= self.q;
            let c = qm / (1.0 - qm);
            let mf = m as f64;
            let sa = (mf * a).sin();
            let mut s = 0.0;
            let mut ds = 0.0;
            for j in 0..4 {
                let e = (-mf * betas[j]).exp();
                s += SIGMA[j] * e;
                ds += SIGMA[j] * dbetas_diag[j] * e;
            }
            rem += sa * sa * s * c / (mf * PI);
            rgx += k / PI * (2.0 * mf * a).sin() * s * c;
            rgy += -sa * sa * ds * c / PI;
        }
        (v / (4.0 * PI) + rem, (gx / (4.0 * PI) + rgx, gy / (4.0 * PI) + rgy))
    }
}

impl GreenFn {
    /// Green function with series truncation set by `tol` on rectangles.
    pub fn new(shape: Shape, tol: f64) -> Result<Self, GreenError> {
        shape.validate().map_err(|e| GreenError::InvalidConfig(e.to_string()))?;
        if !(tol > 0.0) {
            return Err(GreenError::InvalidConfig(format!("tol must be positive, got {tol}")));
        }
        let kind = match shape {
            Shape::Disk { radius } => Kind::Disk { radius },
            Shape::Rect { lx, ly } => Kind::Rect(RectFrame::new(lx, ly, tol)),
        };
        Ok(Self { shape, kind })
    }

    pub fn for_shape(shape: Shape) -> Result<Self, GreenError> {
        Self::new(shape, 1e-16)
    }

    /// Number of remainder terms used on the rectangle (0 on the disk).
    pub fn truncation_order(&self) -> usize {
        match self.kind {
            Kind::Disk { .. } => 0,
            Kind::Rect(f) => f.terms,
        }
    }

    fn check_interior(&self, x: [f64; 2]) -> Result<(), GreenError> {
        if self.shape.contains(x) {
            Ok(())
        } else {
            Err(GreenError::ExteriorPoint(x[0], x[1]))
        }
    }

    /// `G(x, y)`; `x` may lie on the boundary, `y` must be interior.
    pub fn green(&self, x: [f64; 2], y: [f64; 2]) -> Result<f64, GreenError> {
        Ok(self.green_and_gradient(x, y)?.0)
    }

    /// `G(x, y)` together with `∇ₓG(x, y)`.
    pub fn green_and_gradient(&self, x: [f64; 2], y: [f64; 2]) -> Result<(f64, [f64; 2]), GreenError> {
        self.check_interior(y)?;
        if !(self.shape.contains(x) || self.shape.boundary_distance(x) >= -1e-12) {
            return Err(GreenError::ExteriorPoint(x[0], x[1]));
        }
        if x == y {
            return Err(GreenError::CoincidentPoints(x[0], x[1]));
        }
        match self.kind {
            Kind::Disk { radius } => {
                let r2 = radius * radius;
                let (dx, dy) = (x[0] - y[0], x[1] - y[1]);
                let d2 = dx * dx + dy * dy;
                let xx = x[0] * x[0] + x[1] * x[1];
                let yy = y[0] * y[0] + y[1] * y[1];
                let xy = x[0] * y[0] + x[1] * y[1];
                let big = xx * yy - 2.0 * r2 * xy + r2 * r2;
                let g = -d2.ln() / (4.0 * PI) + (big / r2).ln() / (4.0 * PI);
                let grad = [
                    -dx / (2.0 * PI * d2) + (yy * x[0] - r2 * y[0]) / (2.0 * PI * big),
                    -dy / (2.0 * PI * d2) + (yy * x[1] - r2 * y[1]) / (2.0 * PI * big),
                ];
                Ok((g, grad))
            }
            Kind::Rect(f) => {
                let (g, _, grad) = f.green(f.local(x), f.local(y));
                Ok((g, f.global(grad)))
            }
        }
    }

    /// Regular part `H(x, y) = G(x, y) + ln|x − y|/2π`, continuous at `x = y`.
    pub fn regular_part(&self, x: [f64; 2], y: [f64; 2]) -> Result<f64, GreenError> {
        self.check_interior(x)?;
        self.check_interior(y)?;
        if x == y {
            return Ok(self.robin(x)?.0);
        }
        match self.kind {
            Kind::Disk { radius } => {
                let r2 = radius * radius;
                let xx = x[0] * x[0] + x[1] * x[1];
                let yy = y[0] * y[0] + y[1] * y[1];
                let xy = x[0] * y[0] + x[1] * y[1];
                Ok(((xx * yy - 2.0 * r2 * xy + r2 * r2) / r2).ln() / (4.0 * PI))
            }
            Kind::Rect(f) => Ok(f.green(f.local(x), f.local(y)).1),
        }
    }

    /// `H(q, q)` and the gradient of `q ↦ H(q, q)`.
    pub fn robin(&self, q: [f64; 2]) -> Result<(f64, [f64; 2]), GreenError> {
        self.check_interior(q)?;
        match self.kind {
            Kind::Disk { radius } => {
                let r2 = radius * radius;
                let qq = q[0] * q[0] + q[1] * q[1];
                let v = ((r2 - qq) / radius).ln() / (2.0 * PI);
                let c = -1.0 / (PI * (r2 - qq));
                Ok((v, [c * q[0], c * q[1]]))
            }
            Kind::Rect(f) => {
                let (v, g) = f.self_regular(f.local(q));
                Ok((v, f.global(g)))
            }
        }
    }
}

/// Points and weights of a Kirchhoff–Routh configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrConfig {
    pub points: Vec<[f64; 2]>,
    pub masses: Vec<f64>,
}

impl KrConfig {
    pub fn new(points: Vec<[f64; 2]>, masses: Vec<f64>) -> Self {
        Self { points, masses }
    }

    pub fn validate(&self, green: &GreenFn) -> Result<(), GreenError> {
        if self.points.is_empty() || self.points.len() != self.masses.len() {
            return Err(GreenError::InvalidConfig(format!(
                "{} points but {} masses",
                self.points.len(),
                self.masses.len()
            )));
        }
        if let Some(m) = self.masses.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(GreenError::InvalidConfig(format!("mass {m} is not a finite nonnegative number")));
        }
        for (i, p) in self.points.iter().enumerate() {
            green.check_interior(*p)?;
            for q in &self.points[..i] {
                if p == q {
                    return Err(GreenError::CoincidentPoints(p[0], p[1]));
                }
            }
        }
        Ok(())
    }
}

/// `Σ M_i² H(q_i, q_i) + Σ_{i≠l} M_i M_l G(q_i, q_l)`.
pub fn kr_hamiltonian(green: &GreenFn, cfg: &KrConfig) -> Result<f64, GreenError> {
    cfg.validate(green)?;
    let mut total = 0.0;
    for (i, (&qi, &mi)) in cfg.points.iter().zip(&cfg.masses).enumerate() {
        total += mi * mi * green.robin(qi)?.0;
        for (l, (&ql, &ml)) in cfg.points.iter().zip(&cfg.masses).enumerate() {
            if l != i {
                total += mi * ml * green.green(qi, ql)?;
            }
        }
    }
    Ok(total)
}

/// Gradient of the Hamiltonian with respect to each point.
pub fn kr_gradient(green: &GreenFn, cfg: &KrConfig) -> Result<Vec<[f64; 2]>, GreenError> {
    cfg.validate(green)?;
    let mut out = Vec::with_capacity(cfg.points.len());
    for (i, (&qi, &mi)) in cfg.points.iter().zip(&cfg.masses).enumerate() {
        let (_, dh) = green.robin(qi)?;
        let mut g = [mi * mi * dh[0], mi * mi * dh[1]];
        for (l, (&ql, &ml)) in cfg.points.iter().zip(&cfg.masses).enumerate() {
            if l != i {
                let (_, dg) = green.green_and_gradient(qi, ql)?;
                g[0] += 2.0 * mi * ml * dg[0];
                g[1] += 2.0 * mi * ml * dg[1];
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// Settings of the critical-point search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrSearch {
    pub tol: f64,
    pub max_iter: usize,
    /// Points closer than this count as a collision.
    pub min_separation: f64,
    /// Points closer than this to the boundary count as escaped.
    pub boundary_margin: f64,
    /// Largest move of any point per iteration.
    pub max_step: f64,
    /// Finite-difference step for the Hessian.
    pub fd_step: f64,
}

impl Default for KrSearch {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, min_separation: 1e-3, boundary_margin: 1e-3, max_step: 0.05, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrCritical {
    pub config: KrConfig,
    pub hamiltonian: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn flat_gradient(green: &GreenFn, cfg: &KrConfig) -> Result<Vec<f64>, GreenError> {
    Ok(kr_gradient(green, cfg)?.into_iter().flatten().collect())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton iteration on `∇ℋ = 0` with a central-difference Hessian of the
/// analytic gradient and step clipping. Collisions and boundary escapes are
/// reported as errors.
pub fn kr_critical(green: &GreenFn, cfg0: &KrConfig, opts: &KrSearch) -> Result<KrCritical, GreenError> {
    cfg0.validate(green)?;
    let mut cfg = cfg0.clone();
    let n = 2 * cfg.points.len();
    let mut grad = flat_gradient(green, &cfg)?;
    for it in 0..opts.max_iter {
        let gn = inf_norm(&grad);
        if gn < opts.tol {
            return Ok(KrCritical {
                hamiltonian: kr_hamiltonian(green, &cfg)?,
                config: cfg,
                grad_norm: gn,
                iterations: it,
            });
        }
        let mut hess = Mat::<f64>::zeros(n, n);
        for c in 0..n {
            let mut plus = cfg.clone();
            let mut minus = cfg.clone();
            plus.points[c / 2][c % 2] += opts.fd_step;
            minus.points[c / 2][c % 2] -= opts.fd_step;
            let gp = flat_gradient(green, &plus)?;
            let gm = flat_gradient(green, &minus)?;
            for r in 0..n {
                hess[(r, c)] = (gp[r] - gm[r]) / (2.0 * opts.fd_step);
            }
        }
        // Symmetrise to suppress finite-difference noise.
        for r in 0..n {
            for c in 0..r {
                let avg = 0.5 * (hess[(r, c)] + hess[(c, r)]);
                hess[(r, c)] = avg;
                hess[(c, r)] = avg;
            }
        }
        let rhs = Mat::<f64>::from_fn(n, 1, |r, _| -grad[r]);
        let step = hess.partial_piv_lu().solve(&rhs);
        let mut delta: Vec<f64> = (0..n).map(|r| step[(r, 0)]).collect();
        if delta.iter().any(|d| !d.is_finite()) {
            delta = grad.iter().map(|g| -g).collect();
        }
        let biggest = inf_norm(&delta);
        if biggest > opts.max_step {
            for d in &mut delta {
                *d *= opts.max_step / biggest;
            }
        }
        for (k, d) in delta.iter().enumerate() {
            cfg.points[k / 2][k % 2] += d;
        }
        for (i, p) in cfg.points.iter().enumerate() {
            let dist = green.shape.boundary_distance(*p);
            if dist < opts.boundary_margin {
                return Err(GreenError::BoundaryEscape { i, distance: dist });
            }
            for (j, q) in cfg.points[..i].iter().enumerate() {
                let d = (p[0] - q[0]).hypot(p[1] - q[1]);
                if d < opts.min_separation {
                    return Err(GreenError::CollisionDetected { i: j, j: i, distance: d });
                }
            }
        }
        grad = flat_gradient(green, &cfg)?;
    }
    Err(GreenError::NonConvergence { iterations: opts.max_iter, grad_norm: inf_norm(&grad) })
}

/// Far-field comparison of `θ v` with `I_p Σ t_i^{−2/(p−1)} G(x, x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarFieldReport {
    pub r: f64,
    pub samples: usize,
    /// `max |θv − model| / max |model|` over the sample set.
    pub sup_dev: f64,
    /// `Σ |θv − model| / Σ |model|` over the sample set.
    pub mean_dev: f64,
}

/// Samples interior nodes farther than `r` from every spike `(x_i, t_i)`.
/// An empty sample set is reported with `samples = 0` and zero deviations.
pub fn far_field_check(
    green: &GreenFn,
    sol: &crate::solver::GridSolution,
    spikes: &[([f64; 2], f64)],
    theta: f64,
    i_p: f64,
    r: f64,
) -> Result<FarFieldReport, GreenError> {
    let d = &sol.domain;
    let k = 2.0 / (sol.p - 1.0);
    let (mut worst, mut scale, mut sum_dev, mut sum_model) = (0.0f64, 0.0f64, 0.0, 0.0);
    let mut samples = 0;
    for &node in &d.interior {
        let x = d.coords(node);
        if spikes.iter().any(|(c, _)| (x[0] - c[0]).hypot(x[1] - c[1]) < r) {
            continue;
        }
        let mut model = 0.0;
        for &(c, t) in spikes {
            model += i_p * t.powf(-k) * green.green(x, c)?;
        }
        let dev = (theta * sol.v[node] - model).abs();
        worst = worst.max(dev);
        scale = scale.max(model.abs());
        sum_dev += dev;
        sum_model += model.abs();
        samples += 1;
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok(FarFieldReport { r, samples, sup_dev: ratio(worst, scale), mean_dev: ratio(sum_dev, sum_model) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect() -> GreenFn {
        GreenFn::for_shape(Shape::Rect { lx: 2.0, ly: 1.0 }).unwrap()
    }

    #[test]
    fn disk_centre_values() {
        let g = GreenFn::for_shape(Shape::Disk { radius: 1.0 }).unwrap();
        assert!(g.green([1.0, 0.0], [0.0, 0.0]).unwrap().abs() < 1e-15);
        assert!(g.regular_part([0.3, -0.2], [0.0, 0.0]).unwrap().abs() < 1e-15);
        assert!(g.robin([0.0, 0.0]).unwrap().0.abs() < 1e-15);
        let v = g.green([0.5, 0.0], [0.0, 0.0]).unwrap();
        assert!((v - (2.0f64).ln() / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn rect_vanishes_on_boundary_and_is_symmetric() {
        let g = rect();
        let y = [0.7, 0.35];
        for x in [[0.0, 0.4], [2.0, 0.1], [1.3, 0.0], [0.2, 1.0]] {
            assert!(g.green(x, y).unwrap().abs() < 1e-13, "{x:?}");
        }
        let x = [1.4, 0.8];
        assert!((g.green(x, y).unwrap() - g.green(y, x).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn rect_regular_part_is_continuous() {
        let g = rect();
        let q = [0.8, 0.45];
        let h0 = g.robin(q).unwrap().0;
        let h1 = g.regular_part([0.8 + 1e-6, 0.45 - 1e-6], q).unwrap();
        assert!((h0 - h1).abs() < 1e-5);
    }

    #[test]
    fn rejects_coincident_and_exterior() {
        let g = rect();
        assert!(matches!(g.green([0.5, 0.5], [0.5, 0.5]), Err(GreenError::CoincidentPoints(..))));
        assert!(matches!(g.green([0.5, 0.5], [2.5, 0.5]), Err(GreenError::ExteriorPoint(..))));
    }

    #[test]
    fn orientation_does_not_matter() {
        let g1 = rect();
        let g2 = GreenFn::for_shape(Shape::Rect { lx: 1.0, ly: 2.0 }).unwrap();
        let (x, y) = ([1.5, 0.3], [0.4, 0.6]);
        let a = g1.green(x, y).unwrap();
        let b = g2.green([x[1], x[0]], [y[1], y[0]]).unwrap();
        assert!((a - b).abs() < 1e-14);
    }
}
