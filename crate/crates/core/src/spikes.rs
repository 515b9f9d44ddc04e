//! Peak extraction, normalized rescaling, ball masses, classification across
//! `ε`-sweeps, roundness of the plasma set and mass quantization.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

use crate::emden::EmdenSolution;
use crate::entire::EntireSolution;
use crate::grid::NodeKind;
use crate::scales::{solve_scale, ScaleParams};
use crate::solver::GridSolution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpikeError {
    #[error("ball of radius {radius} around ({x}, {y}) leaves the domain")]
    OutOfDomain { x: f64, y: f64, radius: f64 },
    #[error("classification needs at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("peak value {0} does not exceed the plasma level")]
    Subcritical(f64),
}

fn plus_pow(x: f64, p: f64) -> f64 {
    if x > 0.0 {
        x.powf(p)
    } else {
        0.0
    }
}

/// Labels of connected components of `{v > 1}` (4-connectivity, interior
/// nodes only). Returns per-node labels and the component count.
pub fn plasma_components(sol: &GridSolution) -> (Vec<Option<usize>>, usize) {
    let d = &sol.domain;
    let mut label = vec![None; d.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for &start in &d.interior {
        if label[start].is_some() || !(sol.v[start] > 1.0) {
            continue;
        }
        label[start] = Some(count);
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = d.ij(k);
            let nbs = [
                (i + 1 < d.nx).then(|| d.index(i + 1, j)),
                (i > 0).then(|| d.index(i - 1, j)),
                (j + 1 < d.ny).then(|| d.index(i, j + 1)),
                (j > 0).then(|| d.index(i, j - 1)),
            ];
            for nb in nbs.into_iter().flatten() {
                if label[nb].is_none() && d.kind[nb] == NodeKind::Interior && sol.v[nb] > 1.0 {
                    label[nb] = Some(count);
                    queue.push_back(nb);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Sub-grid peak by a separable parabola through the node maximum and its
/// four neighbours.
fn refine_peak(sol: &GridSolution, k: usize) -> ([f64; 2], f64) {
    let d = &sol.domain;
    let (i, j) = d.ij(k);
    let v0 = sol.v[k];
    let mut x = d.coords(k);
    let mut value = v0;
    let axes = [
        (i > 0 && i + 1 < d.nx).then(|| (sol.v[d.index(i - 1, j)], sol.v[d.index(i + 1, j)])),
        (j > 0 && j + 1 < d.ny).then(|| (sol.v[d.index(i, j - 1)], sol.v[d.index(i, j + 1)])),
    ];
    for (axis, pair) in axes.into_iter().enumerate() {
        if let Some((vm, vp)) = pair {
            let curv = vm - 2.0 * v0 + vp;
            if curv < 0.0 {
                let off = (0.5 * (vm - vp) / curv).clamp(-0.5, 0.5);
                x[axis] += off * d.h;
                value -= 0.125 * (vp - vm) * (vp - vm) / curv;
            }
        }
    }
    (x, value)
}

/// Greedy peak list: the global maximum, then the maximum outside the
/// plasma components (and `min_separation` balls) of the peaks found so far,
/// until the next maximum is at most 1.
pub fn find_peaks(sol: &GridSolution, min_separation: f64) -> Vec<([f64; 2], f64)> {
    let d = &sol.domain;
    let (labels, _) = plasma_components(sol);
    let mut excluded = vec![false; d.len()];
    let mut out = Vec::new();
    loop {
        let best = d.interior.iter().filter(|&&k| !excluded[k]).max_by(|&&a, &&b| sol.v[a].total_cmp(&sol.v[b]));
        let Some(&k) = best else { break };
        if !(sol.v[k] > 1.0) {
            break;
        }
        let (x, value) = refine_peak(sol, k);
        out.push((x, value));
        let comp = labels[k];
        let r2 = min_separation * min_separation;
        for &m in &d.interior {
            let c = d.coords(m);
            let near = (c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2) <= r2;
            if near || (comp.is_some() && labels[m] == comp) {
                excluded[m] = true;
            }
        }
        excluded[k] = true;
    }
    out
}

/// `t = (φ(0)/(θ(v−1)))^{(p−1)/2}` for a peak value.
pub fn scale_factor(peak: f64, theta: f64, emden: &EmdenSolution) -> Result<f64, SpikeError> {
    if !(peak > 1.0) {
        return Err(SpikeError::Subcritical(peak));
    }
    Ok((emden.phi0 / (theta * (peak - 1.0))).powf((emden.p - 1.0) / 2.0))
}

/// `t` of every peak of a solution, using `θ(ε)`.
pub fn spike_scales(sol: &GridSolution, emden: &EmdenSolution) -> Vec<f64> {
    let Ok(sc) = solve_scale(sol.eps, emden.dphi1, emden.p, 1e-13) else {
        return Vec::new();
    };
    find_peaks(sol, 0.0).into_iter().filter_map(|(_, v)| scale_factor(v, sc.theta, emden).ok()).collect()
}

/// Normalized rescaling sampled on a square lattice over `B_R(0)`.
#[derive(Debug, Clone, Serialize)]
pub struct RescaledField {
    pub radius: f64,
    pub dz: f64,
    /// `(z, u(z))` for lattice points with `|z| ≤ R`.
    pub samples: Vec<([f64; 2], f64)>,
    pub center_value: f64,
}

/// `u(z) = t^{2/(p−1)} θ (v(x_n + s t z) − 1)` by bilinear interpolation.
pub fn normalize_rescale(
    sol: &GridSolution,
    x_n: [f64; 2],
    t: f64,
    scales: &ScaleParams,
    radius: f64,
) -> Result<RescaledField, SpikeError> {
    let d = &sol.domain;
    let rho = scales.s * t;
    if d.shape.boundary_distance(x_n) < radius * rho {
        return Err(SpikeError::OutOfDomain { x: x_n[0], y: x_n[1], radius: radius * rho });
    }
    let amp = t.powf(2.0 / (sol.p - 1.0)) * scales.theta;
    let u = |z: [f64; 2]| {
        let x = [x_n[0] + rho * z[0], x_n[1] + rho * z[1]];
        amp * (d.interpolate(&sol.v, x).unwrap_or(0.0) - 1.0)
    };
    // Lattice at roughly the grid resolution, capped for very fine grids.
    let dz = (d.h / rho).max(radius / 200.0);
    let m = (radius / dz).floor() as i64;
    let mut samples = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            let z = [i as f64 * dz, j as f64 * dz];
            if z[0].hypot(z[1]) <= radius {
                samples.push((z, u(z)));
            }
        }
    }
    Ok(RescaledField { radius, dz, center_value: u([0.0, 0.0]), samples })
}

/// `sup |u − w*|` over the samples of a rescaled field.
pub fn profile_distance(field: &RescaledField, w_star: &EntireSolution) -> f64 {
    field.samples.iter().map(|(z, u)| (u - w_star.eval(*z)).abs()).fold(0.0, f64::max)
}

/// `((1/ε²)∫_B [v−1]_+^{p−1}, (θ/ε²)∫_B [v−1]_+^p)` over `B_radius(x_n)`.
pub fn ball_masses(
    sol: &GridSolution,
    x_n: [f64; 2],
    radius: f64,
    scales: &ScaleParams,
) -> Result<(f64, f64), SpikeError> {
    let d = &sol.domain;
    if d.shape.boundary_distance(x_n) < radius {
        return Err(SpikeError::OutOfDomain { x: x_n[0], y: x_n[1], radius });
    }
    let e2 = sol.eps * sol.eps;
    let p = sol.p;
    let pm1 = d.integrate_ball(&sol.v, x_n, radius, |v| plus_pow(v - 1.0, p - 1.0)) / e2;
    let mp = d.integrate_ball(&sol.v, x_n, radius, |v| plus_pow(v - 1.0, p)) * scales.theta / e2;
    Ok((pm1, mp))
}

/// Per-peak diagnostics of one solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub eps: f64,
    pub x_n: [f64; 2],
    pub peak: f64,
    pub t_n: f64,
    pub s: f64,
    pub theta: f64,
    pub ball_mass_pm1: f64,
    pub ball_mass_p: f64,
    /// `sup_{B_R} |u_n − w*|`, absent when the comparison ball leaves Ω.
    pub profile_dist: Option<f64>,
    pub r_used: f64,
}

/// Analyses every peak of `sol`. Ball masses use `B_{2R s t}`; balls that
/// would leave the domain are clipped to the largest admissible radius.
pub fn analyze_solution(
    sol: &GridSolution,
    emden: &EmdenSolution,
    w_star: &EntireSolution,
    scales: &ScaleParams,
    r_compare: f64,
) -> Vec<SpikeRecord> {
    find_peaks(sol, 0.0)
        .into_iter()
        .filter_map(|(x, peak)| {
            let t = scale_factor(peak, scales.theta, emden).ok()?;
            let rho = scales.s * t;
            let ball = (2.0 * r_compare * rho).min(sol.domain.shape.boundary_distance(x));
            let (pm1, mp) = ball_masses(sol, x, ball, scales).ok()?;
            let profile_dist =
                normalize_rescale(sol, x, t, scales, r_compare).ok().map(|f| profile_distance(&f, w_star));
            Some(SpikeRecord {
                eps: sol.eps,
                x_n: x,
                peak,
                t_n: t,
                s: scales.s,
                theta: scales.theta,
                ball_mass_pm1: pm1,
                ball_mass_p: mp,
                profile_dist,
                r_used: r_compare,
            })
        })
        .collect()
}

/// One tracked spike along decreasing `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSequence {
    pub eps: Vec<f64>,
    pub s: Vec<f64>,
    /// Record at each `ε`; `None` where no peak above 1 was matched.
    pub records: Vec<Option<SpikeRecord>>,
}

impl SpikeSequence {
    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn t_values(&self) -> Vec<f64> {
        self.records.iter().flatten().map(|r| r.t_n).collect()
    }

    pub fn st_values(&self) -> Vec<f64> {
        self.records.iter().flatten().map(|r| r.s * r.t_n).collect()
    }
}

/// Matches peaks across solutions by nearest location within
/// `cutoff · s · t` (plus two grid cells). A sweep without any peak above
/// the plasma level yields a single empty sequence, which classifies as
/// vanishing.
pub fn track(per_eps: &[(f64, f64, Vec<SpikeRecord>, f64)], cutoff: f64) -> Vec<SpikeSequence> {
    let mut tracks: Vec<SpikeSequence> = Vec::new();
    for (step, (eps, s, records, h)) in per_eps.iter().enumerate() {
        let mut used = vec![false; records.len()];
        for tr in tracks.iter_mut() {
            let last = tr.records.iter().rev().flatten().next().cloned();
            let mut pick = None;
            if let Some(last) = last {
                let reach = cutoff * last.s * last.t_n + 2.0 * h;
                let mut best = f64::INFINITY;
                for (i, r) in records.iter().enumerate() {
                    let dist = (r.x_n[0] - last.x_n[0]).hypot(r.x_n[1] - last.x_n[1]);
                    if !used[i] && dist <= reach && dist < best {
                        best = dist;
                        pick = Some(i);
                    }
                }
            }
            if let Some(i) = pick {
                used[i] = true;
            }
            tr.eps.push(*eps);
            tr.s.push(*s);
            tr.records.push(pick.map(|i| records[i].clone()));
        }
        for (i, r) in records.iter().enumerate() {
            if !used[i] {
                let mut seq = SpikeSequence { eps: Vec::new(), s: Vec::new(), records: Vec::new() };
                for (e, s2, _, _) in &per_eps[..step] {
                    seq.eps.push(*e);
                    seq.s.push(*s2);
                    seq.records.push(None);
                }
                seq.eps.push(*eps);
                seq.s.push(*s);
                seq.records.push(Some(r.clone()));
                tracks.push(seq);
            }
        }
    }
    if tracks.is_empty() && !per_eps.is_empty() {
        tracks.push(SpikeSequence {
            eps: per_eps.iter().map(|e| e.0).collect(),
            s: per_eps.iter().map(|e| e.1).collect(),
            records: vec![None; per_eps.len()],
        });
    }
    tracks
}

/// Finite-data thresholds of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// `t` counts as bounded when its relative drift over the last
    /// `window` records is below this.
    pub drift: f64,
    pub window: usize,
    /// `s·t` counts as tending to 0 when it drops by at least this factor.
    pub decay_factor: f64,
    /// `s·t` counts as bounded below when its minimum exceeds this.
    pub floor: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { drift: 0.10, window: 4, decay_factor: 4.0, floor: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "label")]
pub enum SpikeLabel {
    TypeI {
        t_inf: f64,
    },
    TypeII,
    Fading {
        rho: f64,
    },
    Vanishing,
    /// None of the trend rules fired.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub label: SpikeLabel,
    /// `(max − min)/mean` of `t` over the last window.
    pub t_drift: Option<f64>,
    /// First over last `s·t`.
    pub st_decay: Option<f64>,
    pub st_min: Option<f64>,
    /// `(I_p/(2H_p))^{(p−1)/2}` with `H_p` the largest measured p-mass.
    pub t0_bound: Option<f64>,
    pub t0_check: Option<bool>,
    pub t: Vec<f64>,
    pub st: Vec<f64>,
}

/// `(max − min)/mean`.
pub fn relative_drift(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean.abs()
}

/// Change of the least-squares line through `values` (equally spaced)
/// across the window, relative to the mean.
pub fn fitted_drift(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return 0.0;
    }
    (sxy / sxx * (n - 1.0)).abs() / ym.abs()
}

/// Labels a tracked spike from its trends.
pub fn classify(
    seq: &SpikeSequence,
    cfg: &ClassifyConfig,
    emden: &EmdenSolution,
    h_p: Option<f64>,
) -> Result<Classification, SpikeError> {
    let needed = cfg.window.max(2);
    if seq.len() < needed {
        return Err(SpikeError::InsufficientData { needed, got: seq.len() });
    }
    let t = seq.t_values();
    let st = seq.st_values();
    let base = Classification {
        label: SpikeLabel::Undetermined,
        t_drift: None,
        st_decay: None,
        st_min: None,
        t0_bound: None,
        t0_check: None,
        t: t.clone(),
        st: st.clone(),
    };
    if seq.records.last().is_none_or(|r| r.is_none()) {
        return Ok(Classification { label: SpikeLabel::Vanishing, ..base });
    }
    if t.len() < needed {
        return Err(SpikeError::InsufficientData { needed, got: t.len() });
    }
    let window = &t[t.len() - cfg.window.max(1)..];
    let t_drift = relative_drift(window);
    let st_min = st.iter().cloned().fold(f64::INFINITY, f64::min);
    let st_decay = st[0] / st[st.len() - 1];
    let t0_bound = h_p.map(|hp| (emden.i_p / (2.0 * hp)).powf((emden.p - 1.0) / 2.0));
    let t0_check = t0_bound.map(|b| t.iter().all(|&ti| ti >= b));
    let label = if st_min > cfg.floor {
        SpikeLabel::Fading { rho: st_min }
    } else if st_decay >= cfg.decay_factor {
        if t_drift < cfg.drift {
            SpikeLabel::TypeI { t_inf: window.iter().sum::<f64>() / window.len() as f64 }
        } else if window.windows(2).all(|w| w[1] > w[0]) {
            SpikeLabel::TypeII
        } else {
            SpikeLabel::Undetermined
        }
    } else {
        SpikeLabel::Undetermined
    };
    Ok(Classification {
        label,
        t_drift: Some(t_drift),
        st_decay: Some(st_decay),
        st_min: Some(st_min),
        t0_bound,
        t0_check,
        ..base
    })
}

/// Containment of one plasma component between concentric disks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentRoundness {
    pub center: [f64; 2],
    pub st: f64,
    /// Distance from the centre to the nearest node outside the component.
    pub d_in: f64,
    /// Distance from the centre to the farthest node of the component.
    pub d_out: f64,
    /// Smallest `θ` for which the containment holds at grid resolution.
    pub theta_tight: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundnessReport {
    pub theta: f64,
    pub components: usize,
    pub spikes: Vec<ComponentRoundness>,
    pub pass: bool,
    pub note: Option<String>,
}

/// Checks `B_{(1−θ)st}(x_j) ⊆ component_j ⊆ B_{(1+θ)st}(x_j)` for each
/// spike `(x_j, s·t_j)`.
pub fn roundness(sol: &GridSolution, spikes: &[([f64; 2], f64)], theta: f64) -> RoundnessReport {
    let d = &sol.domain;
    let (labels, count) = plasma_components(sol);
    if count == 0 {
        return RoundnessReport {
            theta,
            components: 0,
            spikes: Vec::new(),
            pass: false,
            note: Some("no components".into()),
        };
    }
    let nearest = |x: [f64; 2]| {
        let i = ((x[0] - d.x0) / d.h).round().clamp(0.0, (d.nx - 1) as f64) as usize;
        let j = ((x[1] - d.y0) / d.h).round().clamp(0.0, (d.ny - 1) as f64) as usize;
        d.index(i, j)
    };
    let mut out = Vec::new();
    for &(c, st) in spikes {
        let comp = labels[nearest(c)];
        let mut d_in = f64::INFINITY;
        let mut d_out: f64 = 0.0;
        for k in 0..d.len() {
            let x = d.coords(k);
            let r = (x[0] - c[0]).hypot(x[1] - c[1]);
            let inside = comp.is_some() && labels[k] == comp;
            if inside {
                d_out = d_out.max(r);
            } else {
                d_in = d_in.min(r);
            }
        }
        let theta_tight = (1.0 - d_in / st).max(d_out / st - 1.0);
        out.push(ComponentRoundness {
            center: c,
            st,
            d_in,
            d_out,
            theta_tight,
            pass: comp.is_some() && theta_tight <= theta,
        });
    }
    let pass = !out.is_empty() && out.iter().all(|c| c.pass);
    RoundnessReport { theta, components: count, spikes: out, pass, note: None }
}

/// Mass totals at one `ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationRow {
    pub eps: f64,
    pub total_pm1: f64,
    pub total_p: f64,
    /// `round(total_pm1 / I_{p−1})`.
    pub n_spikes: usize,
    /// `total_pm1 / (N I_{p−1})`, or 0 with no spikes.
    pub ratio: f64,
    /// `1 / total_p`.
    pub gamma_inf: Option<f64>,
}

/// Per-`ε` quantization data of a sweep.
pub fn quantization_report(sweep: &[GridSolution], emden: &EmdenSolution) -> Vec<QuantizationRow> {
    sweep
        .iter()
        .map(|sol| {
            let theta = solve_scale(sol.eps, emden.dphi1, emden.p, 1e-13).map(|s| s.theta).unwrap_or(f64::NAN);
            let total_pm1 = sol.h1_mass();
            let total_p = sol.h2_mass(theta);
            let n = (total_pm1 / emden.i_pm1).round().max(0.0) as usize;
            QuantizationRow {
                eps: sol.eps,
                total_pm1,
                total_p,
                n_spikes: n,
                ratio: if n > 0 { total_pm1 / (n as f64 * emden.i_pm1) } else { 0.0 },
                gamma_inf: (total_p > 0.0).then(|| 1.0 / total_p),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_of_constant_is_zero() {
        assert_eq!(relative_drift(&[2.0, 2.0, 2.0]), 0.0);
        assert!((relative_drift(&[1.0, 1.1, 0.9]) - 0.2).abs() < 1e-12);
    }
}
