//! Damped Newton solver for `-ε²Δ_h v = [v-1]_+^p`, `v = 0` on the boundary,
//! with `ε`-continuation and recovery of the constraint parameters.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;
use log::{debug, info};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::emden::EmdenSolution;
use crate::green::{GreenError, GreenFn};
use crate::grid::{GridDomain, GridError, Shape};
use crate::scales::{solve_matching, ScaleError};
use crate::spikes;

#[derive(Debug, Error, Clone)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("plasma set is empty; parameters are undefined")]
    ZeroPlasma,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

/// Why a solve stopped without meeting its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stall {
    /// Iteration budget exhausted.
    MaxIterations,
    /// Neither a damped Newton step nor a Picard step reduced the residual.
    NoDescent,
    /// Every damped step undershot `v ≥ -tol` down to the damping floor.
    NegativeUndershoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target for `‖-ε²Δ_h v − [v−1]_+^p‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant on `½‖F‖₂²`.
    pub armijo: f64,
    /// Smallest damping factor tried before falling back to Picard.
    pub min_damping: f64,
    /// Iterates below `-undershoot_tol` are rejected.
    pub undershoot_tol: f64,
    pub picard_fallback: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
            armijo: 1e-4,
            min_damping: 1.0 / 1024.0,
            undershoot_tol: 1e-8,
            picard_fallback: true,
        }
    }
}

/// Starting field for a solve.
#[derive(Debug, Clone)]
pub enum InitialGuess {
    Zero,
    /// Model spikes at `centers` with levels `a > b`, glued to the Green
    /// function of the domain.
    Profiles {
        emden: Arc<EmdenSolution>,
        centers: Vec<[f64; 2]>,
        a: f64,
        b: f64,
    },
    /// A previous solution, bilinearly interpolated onto the new grid.
    Field {
        domain: Arc<GridDomain>,
        v: Vec<f64>,
    },
}

/// A discrete solution on a grid; `v` is stored on every node and is zero
/// off the unknowns.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub domain: Arc<GridDomain>,
    pub p: f64,
    pub eps: f64,
    pub v: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub picard_steps: usize,
    pub stall: Option<Stall>,
}

/// Parameters of the constrained problem recovered from a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    #[serde(rename = "I_total")]
    pub i_total: f64,
    pub q: f64,
}

fn plus_pow(x: f64, p: f64) -> f64 {
    if x > 0.0 {
        x.powf(p)
    } else {
        0.0
    }
}

/// Sparse system `-ε²Δ_h − diag(d)` with a cached symbolic factorisation.
struct System {
    base: SparseColMat<usize, f64>,
    base_vals: Vec<f64>,
    diag_pos: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl System {
    fn new(domain: &GridDomain, eps: f64) -> Result<Self, SolverError> {
        let n = domain.n_unknowns();
        let e2 = eps * eps;
        let mut trips = Vec::with_capacity(5 * n);
        for u in 0..n {
            let st = domain.stencil(u);
            trips.push(Triplet::new(u, u, -e2 * st.diag));
            for (nb, c) in st.neighbours {
                trips.push(Triplet::new(u, nb, -e2 * c));
            }
        }
        let base = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;
        let col_ptr = base.symbolic().col_ptr();
        let row_idx = base.symbolic().row_idx();
        let mut diag_pos = vec![usize::MAX; n];
        for c in 0..n {
            for k in col_ptr[c]..col_ptr[c + 1] {
                if row_idx[k] == c {
                    diag_pos[c] = k;
                }
            }
        }
        let symbolic = SymbolicLu::try_new(base.symbolic()).map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;
        let base_vals = base.val().to_vec();
        Ok(Self { base, base_vals, diag_pos, symbolic })
    }

    /// `y = (-ε²Δ_h) x`.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let col_ptr = self.base.symbolic().col_ptr();
        let row_idx = self.base.symbolic().row_idx();
        let mut y = vec![0.0; x.len()];
        for c in 0..x.len() {
            let xc = x[c];
            for k in col_ptr[c]..col_ptr[c + 1] {
                y[row_idx[k]] += self.base_vals[k] * xc;
            }
        }
        y
    }

    /// Solves `(-ε²Δ_h − diag(d)) x = b`.
    fn solve(&mut self, d: Option<&[f64]>, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        {
            let vals = self.base.val_mut();
            vals.copy_from_slice(&self.base_vals);
            if let Some(d) = d {
                for (i, &di) in d.iter().enumerate() {
                    vals[self.diag_pos[i]] -= di;
                }
            }
        }
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), self.base.as_ref())
            .map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;
        let rhs = Col::<f64>::from_fn(b.len(), |i| b[i]);
        let x = lu.solve(&rhs);
        let out: Vec<f64> = (0..b.len()).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::LinearSolve("non-finite solution".into()));
        }
        Ok(out)
    }
}

fn residual_vec(sys: &System, u: &[f64], p: f64) -> Vec<f64> {
    let mut f = sys.apply(u);
    for (fi, &ui) in f.iter_mut().zip(u) {
        *fi -= plus_pow(ui - 1.0, p);
    }
    f
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Matching masses `m_j` of the Green-glued ansatz.
fn ansatz_masses(
    green: &GreenFn,
    emden: &EmdenSolution,
    s: f64,
    theta: f64,
    centers: &[[f64; 2]],
) -> Result<Vec<f64>, SolverError> {
    let p = emden.p;
    let n = centers.len();
    let mut hjj = vec![0.0; n];
    let mut gjk = vec![vec![0.0; n]; n];
    for j in 0..n {
        hjj[j] = green.robin(centers[j])?.0;
        for k in 0..n {
            if k != j {
                gjk[j][k] = green.green(centers[j], centers[k])?;
            }
        }
    }
    let mut m = vec![1.0f64; n];
    for _ in 0..200 {
        let mut change: f64 = 0.0;
        for j in 0..n {
            let t = m[j].powf(-(p - 1.0) / 2.0);
            let cross: f64 = (0..n).filter(|&k| k != j).map(|k| m[k] * gjk[j][k]).sum();
            let denom = emden.dphi1 * (s * t).ln() + emden.i_p * hjj[j];
            let next = ((theta - emden.i_p * cross) / denom).max(1e-3);
            change = change.max((next - m[j]).abs());
            m[j] = 0.5 * (m[j] + next);
        }
        if change < 1e-13 {
            break;
        }
    }
    Ok(m)
}

/// Green-glued multi-spike field: `a + X m_j φ(|x−x_j|/(s t_j))` inside each
/// core, `b + X I_p Σ m_k G(x, x_k)` elsewhere, with `X = (ε/s)^{2/(p-1)}`.
/// On the centred unit-area disk with one centre this is the model profile.
pub fn multi_spike_ansatz(
    domain: &GridDomain,
    emden: &EmdenSolution,
    eps: f64,
    centers: &[[f64; 2]],
    a: f64,
    b: f64,
) -> Result<Vec<f64>, SolverError> {
    if !(b < a) {
        return Err(SolverError::InvalidInput(format!("levels need b < a, got a = {a}, b = {b}")));
    }
    if centers.is_empty() {
        return Ok(domain.sample(|_| b.max(0.0)));
    }
    let green = GreenFn::for_shape(domain.shape)?;
    let p = emden.p;
    let s = solve_matching(eps, emden.dphi1, p, a - b, 1e-13)?;
    let x_amp = (eps / s).powf(2.0 / (p - 1.0));
    let theta = (a - b) / x_amp;
    let m = ansatz_masses(&green, emden, s, theta, centers)?;
    let radii: Vec<f64> = m.iter().map(|mj| s * mj.powf(-(p - 1.0) / 2.0)).collect();
    let mut out = vec![0.0; domain.len()];
    for &k in &domain.interior {
        let x = domain.coords(k);
        let mut value = None;
        for (j, c) in centers.iter().enumerate() {
            let r = (x[0] - c[0]).hypot(x[1] - c[1]);
            if r < radii[j] {
                let phi = emden.eval_phi(r / radii[j]).expect("inside unit disk");
                value = Some(a + x_amp * m[j] * phi);
                break;
            }
        }
        out[k] = match value {
            Some(v) => v,
            None => {
                let mut acc = 0.0;
                for (j, c) in centers.iter().enumerate() {
                    acc += m[j] * green.green(x, *c)?;
                }
                b + x_amp * emden.i_p * acc
            }
        };
    }
    Ok(out)
}

fn initial_field(domain: &GridDomain, p: f64, eps: f64, init: &InitialGuess) -> Result<Vec<f64>, SolverError> {
    match init {
        InitialGuess::Zero => Ok(vec![0.0; domain.len()]),
        InitialGuess::Profiles { emden, centers, a, b } => {
            if (emden.p - p).abs() > 1e-12 * p {
                return Err(SolverError::InvalidInput(format!(
                    "profile table has p = {}, solve requested p = {p}",
                    emden.p
                )));
            }
            for c in centers {
                if !domain.shape.contains(*c) {
                    return Err(SolverError::InvalidInput(format!("centre {c:?} is outside the domain")));
                }
            }
            multi_spike_ansatz(domain, emden, eps, centers, *a, *b)
        }
        InitialGuess::Field { domain: src, v } => {
            if v.len() != src.len() {
                return Err(SolverError::InvalidInput("field length does not match its grid".into()));
            }
            Ok(domain.sample(|x| src.interpolate(v, x).unwrap_or(0.0)))
        }
    }
}

/// Solves the discrete problem from `init`. A run that stops short of
/// `cfg.tol` is returned with `converged = false` and a [`Stall`] reason.
pub fn solve(
    domain: Arc<GridDomain>,
    p: f64,
    eps: f64,
    init: &InitialGuess,
    cfg: &SolverConfig,
) -> Result<GridSolution, SolverError> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(SolverError::InvalidInput(format!("p must exceed 1, got {p}")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(SolverError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 || !(cfg.min_damping > 0.0 && cfg.min_damping <= 1.0) {
        return Err(SolverError::InvalidInput(format!("bad solver configuration {cfg:?}")));
    }
    let full = initial_field(&domain, p, eps, init)?;
    let mut u: Vec<f64> = domain.interior.iter().map(|&k| full[k]).collect();
    let mut sys = System::new(&domain, eps)?;
    let mut f = residual_vec(&sys, &u, p);
    let mut res = norm_inf(&f);
    let mut iterations = 0;
    let mut picard_steps = 0;
    let mut stall = None;
    debug!("solve eps={eps} unknowns={} initial residual={res:e}", u.len());
    while res > cfg.tol {
        if iterations >= cfg.max_iter {
            stall = Some(Stall::MaxIterations);
            break;
        }
        iterations += 1;
        let d: Vec<f64> = u.iter().map(|&ui| p * plus_pow(ui - 1.0, p - 1.0)).collect();
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let delta = sys.solve(Some(&d), &rhs)?;
        let merit = norm2(&f);
        let mut lambda = 1.0;
        let mut accepted = None;
        let mut undershoot = false;
        while lambda >= cfg.min_damping {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + lambda * b).collect();
            if trial.iter().any(|&x| x < -cfg.undershoot_tol) {
                undershoot = true;
                lambda *= 0.5;
                continue;
            }
            let ft = residual_vec(&sys, &trial, p);
            if norm2(&ft) <= (1.0 - 2.0 * cfg.armijo * lambda) * merit || norm_inf(&ft) <= cfg.tol {
                accepted = Some((trial, ft));
                break;
            }
            lambda *= 0.5;
        }
        if accepted.is_none() && cfg.picard_fallback {
            let src: Vec<f64> = u.iter().map(|&ui| plus_pow(ui - 1.0, p)).collect();
            let trial = sys.solve(None, &src)?;
            let ft = residual_vec(&sys, &trial, p);
            if norm2(&ft) < merit && !trial.iter().any(|&x| x < -cfg.undershoot_tol) {
                picard_steps += 1;
                accepted = Some((trial, ft));
            }
        }
        match accepted {
            Some((nu, nf)) => {
                u = nu;
                f = nf;
                res = norm_inf(&f);
                debug!("  iter {iterations}: damping {lambda} residual {res:e}");
            }
            None => {
                stall = Some(if undershoot { Stall::NegativeUndershoot } else { Stall::NoDescent });
                break;
            }
        }
    }
    let mut v = vec![0.0; domain.len()];
    for (i, &k) in domain.interior.iter().enumerate() {
        v[k] = u[i];
    }
    info!("solve eps={eps} n={} iters={iterations} residual={res:e}", domain.cells_per_length());
    Ok(GridSolution { domain, p, eps, v, residual: res, iterations, converged: res <= cfg.tol, picard_steps, stall })
}

impl GridSolution {
    pub fn v_max(&self) -> f64 {
        self.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> [f64; 2] {
        let (k, _) = self.v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty grid");
        self.domain.coords(k)
    }

    /// `∫ [v−1]_+^q` over the domain.
    pub fn plasma_integral(&self, q: f64) -> f64 {
        self.domain.integrate(&self.v, |x| plus_pow(x - 1.0, q))
    }

    /// `(1/ε²) ∫ [v−1]_+^{p−1}`.
    pub fn h1_mass(&self) -> f64 {
        self.plasma_integral(self.p - 1.0) / (self.eps * self.eps)
    }

    /// `(θ/ε²) ∫ [v−1]_+^p`.
    pub fn h2_mass(&self, theta: f64) -> f64 {
        theta * self.plasma_integral(self.p) / (self.eps * self.eps)
    }

    /// Recomputed `‖-ε²Δ_h v − [v−1]_+^p‖_∞`.
    pub fn discrete_residual(&self) -> f64 {
        let lap = self.domain.laplacian(&self.v);
        let e2 = self.eps * self.eps;
        self.domain
            .interior
            .iter()
            .zip(lap)
            .map(|(&k, l)| (-e2 * l - plus_pow(self.v[k] - 1.0, self.p)).abs())
            .fold(0.0, f64::max)
    }

    /// `(α, λ, γ, I)` from `∫[v−1]_+^p = |α|^{-p}` and `ε²|α|^{p−1}λ = 1`.
    pub fn recover_parameters(&self) -> Result<ParameterSet, SolverError> {
        let mass = self.plasma_integral(self.p);
        if !(mass > 0.0) {
            return Err(SolverError::ZeroPlasma);
        }
        let p = self.p;
        let alpha_abs = mass.powf(-1.0 / p);
        let lambda = 1.0 / (self.eps * self.eps * alpha_abs.powf(p - 1.0));
        let q = p / (p - 1.0);
        Ok(ParameterSet {
            alpha: -alpha_abs,
            lambda,
            gamma: -lambda.powf(1.0 / (p - 1.0)) * alpha_abs,
            i_total: lambda.powf(q),
            q,
        })
    }

    /// `ψ = |α| v / λ` on every node.
    pub fn psi(&self) -> Result<Vec<f64>, SolverError> {
        let par = self.recover_parameters()?;
        let k = -par.alpha / par.lambda;
        Ok(self.v.iter().map(|x| k * x).collect())
    }
}

/// How the grid follows a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    /// Smallest number of cells along the reference length.
    pub n_min: usize,
    /// Largest number of cells along the reference length.
    pub n_max: usize,
    /// Target cells per spike radius `s·t` at the first `ε`.
    pub min_cells_per_spike: f64,
    /// Added to the target at each subsequent `ε`.
    pub cells_ramp: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { n_min: 32, n_max: 511, min_cells_per_spike: 8.0, cells_ramp: 0.75 }
    }
}

impl GridPolicy {
    /// Cells along the reference length for spike radius `rho` at step `k`.
    pub fn cells_for(&self, shape: &Shape, rho: f64, k: usize) -> usize {
        let target = self.min_cells_per_spike + self.cells_ramp * k as f64;
        let n = (target * shape.reference_length() / rho).ceil() as usize;
        n.clamp(self.n_min, self.n_max)
    }
}

/// How each `ε` after the first is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Interpolate the previous field.
    Field,
    /// Rebuild the model ansatz at the previous solution's peaks.
    Reseed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub solver: SolverConfig,
    pub grid: GridPolicy,
    pub warm_start: WarmStart,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), grid: GridPolicy::default(), warm_start: WarmStart::Reseed }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep input rejected: {0}")]
    Invalid(String),
    #[error("solve {index} (eps = {eps}) failed: {source}")]
    Solve { index: usize, eps: f64, source: SolverError, partial: Vec<GridSolution> },
    #[error("solve {index} (eps = {eps}) did not converge (residual {residual:e})")]
    NonConvergence { index: usize, eps: f64, residual: f64, partial: Vec<GridSolution> },
}

/// Solves along a strictly decreasing `ε` list, refining the grid so that
/// the expected spike radius stays resolved.
pub fn continuation_sweep(
    shape: Shape,
    emden: Arc<EmdenSolution>,
    eps_list: &[f64],
    init: &InitialGuess,
    cfg: &SweepConfig,
) -> Result<Vec<GridSolution>, SweepError> {
    if eps_list.is_empty() {
        return Err(SweepError::Invalid("empty eps schedule".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(SweepError::Invalid("eps schedule must be strictly decreasing".into()));
    }
    shape.validate().map_err(|e| SweepError::Invalid(e.to_string()))?;
    let p = emden.p;
    let mut out: Vec<GridSolution> = Vec::with_capacity(eps_list.len());
    for (index, &eps) in eps_list.iter().enumerate() {
        let fail = |source: SolverError, partial: Vec<GridSolution>| SweepError::Solve { index, eps, source, partial };
        let s = match solve_matching(eps, emden.dphi1, p, 1.0, 1e-13) {
            Ok(s) => s,
            Err(e) => return Err(fail(e.into(), out)),
        };
        let t_min = match out.last() {
            Some(prev) => spikes::spike_scales(prev, &emden).into_iter().fold(1.0f64, f64::min).max(1e-3),
            None => 1.0,
        };
        let n = cfg.grid.cells_for(&shape, s * t_min, index);
        let domain = match GridDomain::new(shape, n) {
            Ok(d) => Arc::new(d),
            Err(e) => return Err(fail(e.into(), out)),
        };
        let start = match out.last() {
            None => init.clone(),
            Some(prev) => match cfg.warm_start {
                WarmStart::Field => InitialGuess::Field { domain: prev.domain.clone(), v: prev.v.clone() },
                WarmStart::Reseed => {
                    let centers: Vec<[f64; 2]> = spikes::find_peaks(prev, 0.0).into_iter().map(|(x, _)| x).collect();
                    InitialGuess::Profiles { emden: emden.clone(), centers, a: 1.0, b: 0.0 }
                }
            },
        };
        let sol = match solve(domain, p, eps, &start, &cfg.solver) {
            Ok(sol) => sol,
            Err(e) => return Err(fail(e, out)),
        };
        if !sol.converged {
            let residual = sol.residual;
            out.push(sol);
            return Err(SweepError::NonConvergence { index, eps, residual, partial: out });
        }
        out.push(sol);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_an_exact_solution() {
        let d = Arc::new(GridDomain::rect(2.0, 1.0, 8).unwrap());
        let sol = solve(d, 2.0, 0.1, &InitialGuess::Zero, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert!(matches!(sol.recover_parameters(), Err(SolverError::ZeroPlasma)));
    }

    #[test]
    fn rejects_bad_schedules() {
        let e = Arc::new(
            crate::emden::solve_emden_with(2.0, 1e-8, &crate::EmdenConfig { samples: 400, ..Default::default() })
                .unwrap(),
        );
        let shape = Shape::Disk { radius: crate::UNIT_AREA_RADIUS };
        let cfg = SweepConfig::default();
        assert!(matches!(
            continuation_sweep(shape, e.clone(), &[], &InitialGuess::Zero, &cfg),
            Err(SweepError::Invalid(_))
        ));
        assert!(matches!(
            continuation_sweep(shape, e, &[0.1, 0.2], &InitialGuess::Zero, &cfg),
            Err(SweepError::Invalid(_))
        ));
    }
}
