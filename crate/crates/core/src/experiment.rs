//! Reproducible end-to-end pipelines driven by a JSON configuration.
//!
//! Every report embeds the configuration with all defaults filled in, and
//! nothing time- or machine-dependent is written, so rerunning a config
//! reproduces its JSON and CSV outputs byte for byte.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

use crate::emden::{solve_emden_with, EmdenConfig, EmdenError, EmdenSolution, EmdenSummary};
use crate::entire::EntireSolution;
use crate::field_io;
use crate::green::{far_field_check, FarFieldReport, GreenFn};
use crate::grid::Shape;
use crate::scales::{solve_scale, ScaleParams};
use crate::solver::{continuation_sweep, GridSolution, InitialGuess, SweepConfig, SweepError};
use crate::spikes::{
    analyze_solution, classify, fitted_drift, quantization_report, roundness, track, Classification, ClassifyConfig,
    QuantizationRow, RoundnessReport, SpikeRecord, SpikeSequence,
};
use crate::UNIT_AREA_RADIUS;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("stage {stage}: solve {index} (eps = {eps}) did not converge")]
    NonConvergence { stage: &'static str, index: usize, eps: f64 },
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn stage<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> ExperimentError {
    move |e| ExperimentError::Stage { stage, message: e.to_string() }
}

fn default_tol() -> f64 {
    1e-10
}
fn default_samples() -> usize {
    100_000
}
fn default_p() -> f64 {
    2.0
}
fn default_r_compare() -> f64 {
    2.0
}
fn default_far_r() -> Vec<f64> {
    vec![0.3]
}
fn default_theta_round() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmdenTableSpec {
    pub p: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_p")]
    pub p: f64,
    /// Strictly decreasing `ε` schedule.
    pub eps: Vec<f64>,
    /// Defaults to the unit-area disk or the `2 × 1` rectangle.
    #[serde(default)]
    pub domain: Option<Shape>,
    /// Spike centres of the initial ansatz; defaults to the domain centre.
    #[serde(default)]
    pub centers: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default = "default_tol")]
    pub emden_tol: f64,
    #[serde(default = "default_samples")]
    pub emden_samples: usize,
    /// Radius `R` of the comparison ball `B_R` for the normalized rescaling.
    #[serde(default = "default_r_compare")]
    pub r_compare: f64,
    #[serde(default = "default_far_r")]
    pub far_field_r: Vec<f64>,
    #[serde(default = "default_theta_round")]
    pub roundness_theta: f64,
    #[serde(default)]
    pub dump_fields: bool,
    /// Reserved for randomised starts; no current pipeline draws numbers.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    EmdenTable(EmdenTableSpec),
    DiskSpikeSweep(SweepSpec),
    RectSpikeSweep(SweepSpec),
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Validation(e.to_string()))?;
        cfg.materialize();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills every optional field with its default.
    pub fn materialize(&mut self) {
        match self {
            Self::EmdenTable(_) => {}
            Self::DiskSpikeSweep(s) => {
                s.domain.get_or_insert(Shape::Disk { radius: UNIT_AREA_RADIUS });
                s.centers.get_or_insert_with(|| vec![[0.0, 0.0]]);
            }
            Self::RectSpikeSweep(s) => {
                let shape = *s.domain.get_or_insert(Shape::Rect { lx: 2.0, ly: 1.0 });
                s.centers.get_or_insert_with(|| match shape {
                    Shape::Rect { lx, ly } => vec![[0.5 * lx, 0.5 * ly]],
                    Shape::Disk { .. } => vec![[0.0, 0.0]],
                });
            }
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Validation(m));
        match self {
            Self::EmdenTable(t) => {
                if t.p.is_empty() {
                    return bad("empty p list".into());
                }
                if t.p.iter().any(|p| !(*p > 1.0)) {
                    return bad("every p must exceed 1".into());
                }
                if !(t.tol > 0.0) || t.samples < 8 {
                    return bad("tol must be positive and samples at least 8".into());
                }
            }
            Self::DiskSpikeSweep(s) | Self::RectSpikeSweep(s) => {
                if s.eps.is_empty() {
                    return bad("empty eps schedule".into());
                }
                if s.eps.iter().any(|e| !(*e > 0.0)) || s.eps.windows(2).any(|w| !(w[1] < w[0])) {
                    return bad("eps schedule must be positive and strictly decreasing".into());
                }
                if !(s.p > 1.0) {
                    return bad(format!("p must exceed 1, got {}", s.p));
                }
                let tols = [s.emden_tol, s.sweep.solver.tol, s.r_compare, s.roundness_theta];
                if tols.iter().any(|t| !(*t > 0.0)) || s.far_field_r.iter().any(|r| !(*r > 0.0)) {
                    return bad("tolerances and radii must be positive".into());
                }
                if s.sweep.grid.n_min < 2 || s.sweep.grid.n_max < s.sweep.grid.n_min {
                    return bad("grid bounds need 2 <= n_min <= n_max".into());
                }
                let shape = s.domain.expect("materialized");
                let matches = matches!(
                    (self, shape),
                    (Self::DiskSpikeSweep(_), Shape::Disk { .. }) | (Self::RectSpikeSweep(_), Shape::Rect { .. })
                );
                if !matches {
                    return bad("domain kind does not match the experiment kind".into());
                }
                shape.validate().map_err(|e| ExperimentError::Validation(e.to_string()))?;
                let centers = s.centers.as_ref().expect("materialized");
                if centers.is_empty() || centers.iter().any(|c| !shape.contains(*c)) {
                    return bad("centres must be non-empty and inside the domain".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmdenRow {
    #[serde(flatten)]
    pub summary: EmdenSummary,
    /// `I_p + 2πφ'(1)`.
    pub res_ip: f64,
    /// `I_{p+1} − (p+1) I_p²/(8π)`.
    pub res_pohozaev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmdenTableReport {
    pub config: ExperimentConfig,
    pub rows: Vec<EmdenRow>,
}

/// Per-`ε` summary of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub n: usize,
    pub h: f64,
    pub converged: bool,
    pub iters: usize,
    pub residual: f64,
    pub v_max: f64,
    #[serde(rename = "H1_mass")]
    pub h1_mass: f64,
    #[serde(rename = "H2_mass")]
    pub h2_mass: f64,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub s: f64,
    pub theta: f64,
    /// `|α| / (λ ln λ)`.
    pub alpha_ratio: Option<f64>,
    /// Distance from the global maximum to the boundary.
    pub argmax_boundary_distance: f64,
    pub spikes: Vec<SpikeRecord>,
    pub far_field: Vec<FarFieldReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackReport {
    pub sequence: SpikeSequence,
    pub classification: Option<Classification>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub emden: EmdenSummary,
    pub rows: Vec<SweepRow>,
    pub tracks: Vec<TrackReport>,
    pub quantization: Vec<QuantizationRow>,
    pub roundness: RoundnessReport,
    /// Fitted relative drift of `|α|/(λ ln λ)` over the last four rows.
    pub alpha_ratio_drift: Option<f64>,
    /// `γ_∞ |φ'(1)| (p−1)/2` with `γ_∞` from the smallest-`ε` p-mass.
    pub alpha_ratio_prediction: Option<f64>,
    /// Peak separation ratios `|x_i − x_j| / (s max(t_i, t_j))` per row.
    pub separation: Vec<Option<f64>>,
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentReport {
    EmdenTable(Box<EmdenTableReport>),
    Sweep(Box<SweepReport>),
}

pub fn emden_table(spec: &EmdenTableSpec, config: &ExperimentConfig) -> Result<EmdenTableReport, ExperimentError> {
    let cfg = EmdenConfig { samples: spec.samples, ..Default::default() };
    let rows = spec
        .p
        .iter()
        .map(|&p| {
            let sol = solve_emden_with(p, spec.tol, &cfg).map_err(stage::<EmdenError>("emden"))?;
            Ok(EmdenRow {
                summary: sol.summary(),
                res_ip: sol.i_p + 2.0 * PI * sol.dphi1,
                res_pohozaev: sol.i_pp1 - (p + 1.0) / (8.0 * PI) * sol.i_p * sol.i_p,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(EmdenTableReport { config: config.clone(), rows })
}

/// Solves and analyses a sweep; shared by the CLI and the tests.
pub fn spike_sweep(
    spec: &SweepSpec,
    config: &ExperimentConfig,
) -> Result<(SweepReport, Vec<GridSolution>), ExperimentError> {
    let shape = spec.domain.expect("materialized");
    let centers = spec.centers.clone().expect("materialized");
    let emden = Arc::new(
        solve_emden_with(spec.p, spec.emden_tol, &EmdenConfig { samples: spec.emden_samples, ..Default::default() })
            .map_err(stage::<EmdenError>("emden"))?,
    );
    let init = InitialGuess::Profiles { emden: emden.clone(), centers, a: 1.0, b: 0.0 };
    let sols = continuation_sweep(shape, emden.clone(), &spec.eps, &init, &spec.sweep).map_err(|e| match e {
        SweepError::NonConvergence { index, eps, .. } => ExperimentError::NonConvergence { stage: "solve", index, eps },
        other => ExperimentError::Stage { stage: "solve", message: other.to_string() },
    })?;
    let report = analyze_sweep(&sols, &emden, spec, config)?;
    Ok((report, sols))
}

/// Analysis stage of a sweep over already computed solutions.
pub fn analyze_sweep(
    sols: &[GridSolution],
    emden: &Arc<EmdenSolution>,
    spec: &SweepSpec,
    config: &ExperimentConfig,
) -> Result<SweepReport, ExperimentError> {
    let w_star = EntireSolution::w_star(emden.clone());
    let shape =
        sols.first().map(|s| s.domain.shape).ok_or_else(|| ExperimentError::Validation("no solutions".into()))?;
    let green = GreenFn::for_shape(shape).map_err(stage("green"))?;
    let mut rows = Vec::with_capacity(sols.len());
    let mut per_eps = Vec::with_capacity(sols.len());
    let mut scales: Vec<ScaleParams> = Vec::with_capacity(sols.len());
    for sol in sols {
        let sc = solve_scale(sol.eps, emden.dphi1, emden.p, 1e-13).map_err(stage("scales"))?;
        let spikes = analyze_solution(sol, emden, &w_star, &sc, spec.r_compare);
        let params = sol.recover_parameters().ok();
        let pairs: Vec<([f64; 2], f64)> = spikes.iter().map(|r| (r.x_n, r.t_n)).collect();
        let far_field = if pairs.is_empty() {
            Vec::new()
        } else {
            spec.far_field_r
                .iter()
                .map(|&r| far_field_check(&green, sol, &pairs, sc.theta, emden.i_p, r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(stage("far_field"))?
        };
        rows.push(SweepRow {
            eps: sol.eps,
            n: sol.domain.cells_per_length(),
            h: sol.domain.h,
            converged: sol.converged,
            iters: sol.iterations,
            residual: sol.residual,
            v_max: sol.v_max(),
            h1_mass: sol.h1_mass(),
            h2_mass: sol.h2_mass(sc.theta),
            alpha: params.map(|p| p.alpha),
            lambda: params.map(|p| p.lambda),
            s: sc.s,
            theta: sc.theta,
            alpha_ratio: params.map(|p| -p.alpha / (p.lambda * p.lambda.ln())),
            argmax_boundary_distance: shape.boundary_distance(sol.argmax()),
            spikes: spikes.clone(),
            far_field,
        });
        per_eps.push((sol.eps, sc.s, spikes, sol.domain.h));
        scales.push(sc);
    }
    let h_p = rows.iter().map(|r| r.h2_mass).fold(0.0f64, f64::max);
    let tracks = track(&per_eps, 3.0)
        .into_iter()
        .map(|sequence| match classify(&sequence, &spec.classify, emden, (h_p > 0.0).then_some(h_p)) {
            Ok(c) => TrackReport { sequence, classification: Some(c), error: None },
            Err(e) => TrackReport { sequence, classification: None, error: Some(e.to_string()) },
        })
        .collect();
    let quantization = quantization_report(sols, emden);
    let last = sols.last().expect("non-empty");
    let last_sc = scales.last().expect("non-empty");
    let last_pairs: Vec<([f64; 2], f64)> =
        rows.last().expect("non-empty").spikes.iter().map(|r| (r.x_n, last_sc.s * r.t_n)).collect();
    let roundness = roundness(last, &last_pairs, spec.roundness_theta);
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.alpha_ratio).collect();
    let alpha_ratio_drift = (ratios.len() >= 4).then(|| fitted_drift(&ratios[ratios.len() - 4..]));
    let alpha_ratio_prediction =
        quantization.last().and_then(|q| q.gamma_inf).map(|g| g * emden.dphi1.abs() * (emden.p - 1.0) / 2.0);
    let separation = rows
        .iter()
        .map(|r| {
            let mut best: Option<f64> = None;
            for (i, a) in r.spikes.iter().enumerate() {
                for b in &r.spikes[..i] {
                    let d = (a.x_n[0] - b.x_n[0]).hypot(a.x_n[1] - b.x_n[1]);
                    let ratio = d / (r.s * a.t_n.max(b.t_n));
                    best = Some(best.map_or(ratio, |x: f64| x.min(ratio)));
                }
            }
            best
        })
        .collect();
    Ok(SweepReport {
        config: config.clone(),
        emden: emden.summary(),
        rows,
        tracks,
        quantization,
        roundness,
        alpha_ratio_drift,
        alpha_ratio_prediction,
        separation,
    })
}

fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, text).map_err(|e| ExperimentError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, ExperimentError> {
    serde_json::to_string_pretty(v).map_err(stage("serialize"))
}

/// Runs a configuration and writes its artefacts into `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| ExperimentError::Io { path: out_dir.to_path_buf(), message: e.to_string() })?;
    match config {
        ExperimentConfig::EmdenTable(spec) => {
            let report = emden_table(spec, config)?;
            let mut csv = String::from("p,phi0,dphi1,I_pm1,I_p,I_pp1,res_ip,res_pohozaev\n");
            for r in &report.rows {
                let s = &r.summary;
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    s.p, s.phi0, s.dphi1, s.i_pm1, s.i_p, s.i_pp1, r.res_ip, r.res_pohozaev
                )
                .expect("string write");
            }
            write(&out_dir.join("emden_table.csv"), &csv)?;
            write(&out_dir.join("summary.json"), &to_json(&report)?)?;
            Ok(ExperimentReport::EmdenTable(Box::new(report)))
        }
        ExperimentConfig::DiskSpikeSweep(spec) | ExperimentConfig::RectSpikeSweep(spec) => {
            let (report, sols) = spike_sweep(spec, config)?;
            write_sweep_outputs(&report, &sols, spec.dump_fields, out_dir)?;
            Ok(ExperimentReport::Sweep(Box::new(report)))
        }
    }
}

pub fn write_sweep_outputs(
    report: &SweepReport,
    sols: &[GridSolution],
    dump_fields: bool,
    out_dir: &Path,
) -> Result<(), ExperimentError> {
    let mut csv =
        String::from("eps,n,converged,iters,residual,v_max,H1_mass,H2_mass,alpha,lambda,s,theta,alpha_ratio\n");
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &report.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.eps,
            r.n,
            r.converged,
            r.iters,
            r.residual,
            r.v_max,
            r.h1_mass,
            r.h2_mass,
            opt(r.alpha),
            opt(r.lambda),
            r.s,
            r.theta,
            opt(r.alpha_ratio)
        )
        .expect("string write");
    }
    write(&out_dir.join("sweep.csv"), &csv)?;
    for (k, tr) in report.tracks.iter().enumerate() {
        let mut t = String::from("eps,t_n,s_t,mass_pm1,mass_p\n");
        for r in tr.sequence.records.iter().flatten() {
            writeln!(t, "{},{},{},{},{}", r.eps, r.t_n, r.s * r.t_n, r.ball_mass_pm1, r.ball_mass_p)
                .expect("string write");
        }
        write(&out_dir.join(format!("trend_spike{k}.csv")), &t)?;
    }
    let mut q = String::from("eps,total_pm1,total_p,n_spikes,ratio\n");
    for r in &report.quantization {
        writeln!(q, "{},{},{},{},{}", r.eps, r.total_pm1, r.total_p, r.n_spikes, r.ratio).expect("string write");
    }
    write(&out_dir.join("quantization.csv"), &q)?;
    write(&out_dir.join("summary.json"), &to_json(report)?)?;
    if dump_fields {
        for (k, sol) in sols.iter().enumerate() {
            let path = out_dir.join(format!("field_{k}.pslb"));
            field_io::write_binary(sol, &path).map_err(stage("dump"))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_schedule_is_rejected() {
        let err = ExperimentConfig::from_json(r#"{"kind":"disk_spike_sweep","eps":[]}"#).unwrap_err();
        assert!(matches!(err, ExperimentError::Validation(_)));
    }

    #[test]
    fn defaults_are_materialized() {
        let cfg = ExperimentConfig::from_json(r#"{"kind":"rect_spike_sweep","eps":[0.05]}"#).unwrap();
        let ExperimentConfig::RectSpikeSweep(s) = &cfg else { panic!() };
        assert_eq!(s.domain, Some(Shape::Rect { lx: 2.0, ly: 1.0 }));
        assert_eq!(s.centers, Some(vec![[1.0, 0.5]]));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"kind":"emden_table","p":[2],"bogus":1}"#).is_err());
    }
}
