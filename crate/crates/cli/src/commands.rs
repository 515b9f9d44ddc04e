use crate::error::{CliError, Kind};
use crate::{Cli, Command, DomainArgs, DomainKind, DumpFormat};
use serde::Serialize;
use serde_json::json;
use spikelab::emden::{solve_emden_with, EmdenConfig};
use spikelab::experiment::{analyze_sweep, run, write_sweep_outputs, ExperimentConfig, TrackReport};
use spikelab::field_io::{read_binary, write_binary, write_csv};
use spikelab::green::{kr_critical, kr_gradient, kr_hamiltonian, KrSearch};
use spikelab::profile::build_profile;
use spikelab::solver::{continuation_sweep, GridPolicy, SweepConfig, SweepError};
use spikelab::spikes::{QuantizationRow, RoundnessReport};
use spikelab::{
    entire, solve_scale, EntireSolution, GreenFn, GridSolution, InitialGuess, KrConfig, Shape, SolverConfig,
    UNIT_AREA_RADIUS,
};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cli: &Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(CliError::validation("--threads must be at least 1"));
    }
    if cli.threads > 1 {
        log::warn!("--threads {} requested; pipelines run sequentially", cli.threads);
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Emden { p, tol, samples, table } => emden(*p, *tol, *samples, *table, out),
        Command::Entire { p, radius, scale } => entire(*p, *radius, *scale),
        Command::Onedim { p, a, tol, samples } => onedim(*p, *a, *tol, *samples, out),
        Command::Scales { p, eps } => scales(*p, eps),
        Command::Profile { p, eps, a, b, samples } => profile(*p, *eps, *a, *b, *samples, out),
        Command::Solve { domain, p, eps, spikes, grid, tol, dump } => {
            solve(domain, *p, eps, spikes.as_deref(), *grid, *tol, *dump, out)
        }
        Command::Analyze { fields, r_compare, theta } => analyze(fields, *r_compare, *theta, out),
        Command::Kr { domain, points, masses, find_critical } => kr(domain, points, masses.as_deref(), *find_critical),
        Command::Experiment { config } => experiment(config, out),
    }
}

/// Writes to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::other(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::other(e.to_string()))?;
    emit(&format!("{text}\n"))
}

fn require_out<'a>(out: Option<&'a Path>, what: &str) -> Result<&'a Path> {
    let dir = out.ok_or_else(|| CliError::validation(format!("{what} needs --out <dir>")))?;
    fs::create_dir_all(dir).map_err(|e| CliError::other(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::other(format!("cannot write {}: {e}", path.display())))
}

fn emden_table(p: f64, tol: f64, samples: usize) -> Result<Arc<spikelab::EmdenSolution>> {
    Ok(Arc::new(solve_emden_with(p, tol, &EmdenConfig { samples, ..Default::default() })?))
}

fn emden(p: f64, tol: f64, samples: usize, table: bool, out: Option<&Path>) -> Result<()> {
    let e = emden_table(p, tol, samples)?;
    if table {
        let dir = require_out(out, "--table")?;
        let mut csv = String::from("r,phi,dphi\n");
        for s in &e.radial_table {
            csv.push_str(&format!("{},{},{}\n", s.r, s.phi, s.dphi));
        }
        write_file(&dir.join("emden_radial.csv"), &csv)?;
    }
    print_json(&e.summary())
}

fn entire(p: f64, radius: f64, scale: Option<f64>) -> Result<()> {
    let e = emden_table(p, 1e-10, 100_000)?;
    let mut w = EntireSolution::new(e, radius)?;
    if let Some(t) = scale {
        w = w.rescale(t)?;
    }
    let m = w.masses();
    print_json(&json!({"R_p": w.r_p, "beta_pm1": m.beta_pm1, "beta_p": m.beta_p, "beta_pp1": m.beta_pp1}))
}

fn onedim(p: f64, a: f64, tol: f64, samples: Option<usize>, out: Option<&Path>) -> Result<()> {
    let sol = entire::solve_onedim(p, a, tol)?;
    if let Some(n) = samples {
        if n < 2 {
            return Err(CliError::validation("--samples must be at least 2"));
        }
        let dir = require_out(out, "--samples")?;
        let mut csv = String::from("t,u\n");
        for i in 0..n {
            let t = sol.t0 * i as f64 / (n - 1) as f64;
            csv.push_str(&format!("{t},{}\n", sol.eval(t)));
        }
        write_file(&dir.join("onedim.csv"), &csv)?;
    }
    print_json(&json!({"p": p, "a": a, "t0": sol.t0, "tail_slope": sol.tail_slope()}))
}

fn scales(p: f64, eps: &[f64]) -> Result<()> {
    let e = emden_table(p, 1e-10, 100_000)?;
    let mut csv = String::from("eps,s,theta\n");
    for &x in eps {
        let sc = solve_scale(x, e.dphi1, p, 1e-14)?;
        csv.push_str(&format!("{},{},{}\n", sc.eps, sc.s, sc.theta));
    }
    emit(&csv)
}

fn profile(p: f64, eps: f64, a: f64, b: f64, samples: Option<usize>, out: Option<&Path>) -> Result<()> {
    let e = emden_table(p, 1e-10, 100_000)?;
    let prof = build_profile(e, eps, a, b, 1e-14)?;
    if let Some(n) = samples {
        if n < 2 {
            return Err(CliError::validation("--samples must be at least 2"));
        }
        let dir = require_out(out, "--samples")?;
        let mut csv = String::from("r,U\n");
        for i in 0..n {
            let r = prof.r2 * i as f64 / (n - 1) as f64;
            csv.push_str(&format!("{r},{}\n", prof.eval_radial(r)?));
        }
        write_file(&dir.join("profile.csv"), &csv)?;
    }
    let c = prof.constraint_parameters();
    print_json(&json!({
        "p": p, "eps": eps, "a": a, "b": b,
        "s_eps": prof.s_eps, "theta": prof.theta(),
        "alpha_abs": c.alpha_abs, "lambda": c.lambda,
        "masses": prof.masses(),
    }))
}

impl DomainArgs {
    fn shape(&self) -> Result<Shape> {
        let shape = match self.domain {
            DomainKind::Disk => {
                if self.lx.is_some() || self.ly.is_some() {
                    return Err(CliError::validation("--lx/--ly apply to --domain rect"));
                }
                Shape::Disk { radius: self.radius.unwrap_or(UNIT_AREA_RADIUS) }
            }
            DomainKind::Rect => {
                if self.radius.is_some() {
                    return Err(CliError::validation("--radius applies to --domain disk"));
                }
                Shape::Rect { lx: self.lx.unwrap_or(2.0), ly: self.ly.unwrap_or(1.0) }
            }
        };
        shape.validate().map_err(|e| CliError::validation(e.to_string()))?;
        Ok(shape)
    }
}

fn centre(shape: Shape) -> [f64; 2] {
    match shape {
        Shape::Disk { .. } => [0.0, 0.0],
        Shape::Rect { lx, ly } => [0.5 * lx, 0.5 * ly],
    }
}

/// Parses `"x1,y1;x2,y2"`.
pub fn parse_points(text: &str) -> Result<Vec<[f64; 2]>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let xy: Vec<&str> = pair.split(',').map(str::trim).collect();
            match xy.as_slice() {
                [x, y] => match (x.parse(), y.parse()) {
                    (Ok(x), Ok(y)) => Ok([x, y]),
                    _ => Err(CliError::validation(format!("bad point {pair:?}"))),
                },
                _ => Err(CliError::validation(format!("bad point {pair:?}, expected x,y"))),
            }
        })
        .collect()
}

fn parse_masses(text: &str) -> Result<Vec<f64>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|m| m.trim().parse().map_err(|_| CliError::validation(format!("bad mass {m:?}"))))
        .collect()
}

#[derive(Serialize)]
struct SolveRow {
    eps: f64,
    n: usize,
    converged: bool,
    iters: usize,
    residual: f64,
    v_max: f64,
    #[serde(rename = "H1_mass")]
    h1_mass: f64,
    #[serde(rename = "H2_mass")]
    h2_mass: f64,
    alpha: Option<f64>,
    lambda: Option<f64>,
}

fn solve_row(sol: &GridSolution, dphi1: f64) -> Result<SolveRow> {
    let sc = solve_scale(sol.eps, dphi1, sol.p, 1e-13)?;
    let par = sol.recover_parameters().ok();
    Ok(SolveRow {
        eps: sol.eps,
        n: sol.domain.cells_per_length(),
        converged: sol.converged,
        iters: sol.iterations,
        residual: sol.residual,
        v_max: sol.v_max(),
        h1_mass: sol.h1_mass(),
        h2_mass: sol.h2_mass(sc.theta),
        alpha: par.map(|q| q.alpha),
        lambda: par.map(|q| q.lambda),
    })
}

#[allow(clippy::too_many_arguments)]
fn solve(
    domain: &DomainArgs,
    p: f64,
    eps: &[f64],
    spikes: Option<&str>,
    grid: Option<usize>,
    tol: f64,
    dump: Option<DumpFormat>,
    out: Option<&Path>,
) -> Result<()> {
    let shape = domain.shape()?;
    let centers = match spikes {
        Some(text) => parse_points(text)?,
        None => vec![centre(shape)],
    };
    if let Some(c) = centers.iter().find(|c| !shape.contains(**c)) {
        return Err(CliError::validation(format!("spike centre {c:?} lies outside the domain")));
    }
    let dump_dir = match dump {
        Some(_) => Some(require_out(out, "--dump")?),
        None => None,
    };
    let e = emden_table(p, 1e-10, 100_000)?;
    let mut policy = GridPolicy::default();
    if let Some(n) = grid {
        policy.n_min = n;
        policy.n_max = n;
    }
    let cfg = SweepConfig { solver: SolverConfig { tol, ..Default::default() }, grid: policy, ..Default::default() };
    let init = InitialGuess::Profiles { emden: e.clone(), centers, a: 1.0, b: 0.0 };
    let (sols, failure) = match continuation_sweep(shape, e.clone(), eps, &init, &cfg) {
        Ok(sols) => (sols, None),
        Err(SweepError::NonConvergence { index, eps, residual, partial }) => {
            let msg = format!("solve {index} (eps = {eps}) did not converge (residual {residual:e})");
            (partial, Some(CliError { kind: Kind::NonConvergence, message: msg }))
        }
        Err(err) => return Err(err.into()),
    };
    for (k, sol) in sols.iter().enumerate() {
        let line = serde_json::to_string(&solve_row(sol, e.dphi1)?).map_err(|e| CliError::other(e.to_string()))?;
        emit(&format!("{line}\n"))?;
        if let (Some(dir), Some(fmt)) = (dump_dir, dump) {
            match fmt {
                DumpFormat::Bin => write_binary(sol, &dir.join(format!("field_{k}.pslb")))?,
                DumpFormat::Csv => write_csv(sol, &dir.join(format!("field_{k}.csv")))?,
            }
        }
    }
    failure.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct SpikeMasses {
    pm1: f64,
    p: f64,
}

#[derive(Serialize)]
struct SpikeEntry {
    eps: f64,
    x: [f64; 2],
    peak: f64,
    t_n: f64,
    masses: SpikeMasses,
    profile_dist: Option<f64>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    fields: Vec<PathBuf>,
    spikes: Vec<Vec<SpikeEntry>>,
    classification: Vec<TrackReport>,
    quantization: Vec<QuantizationRow>,
    roundness: RoundnessReport,
}

fn analyze(fields: &[PathBuf], r_compare: f64, theta: f64, out: Option<&Path>) -> Result<()> {
    let mut sols: Vec<(PathBuf, GridSolution)> =
        fields.iter().map(|f| Ok((f.clone(), read_binary(f)?))).collect::<Result<_>>()?;
    sols.sort_by(|a, b| b.1.eps.total_cmp(&a.1.eps));
    let (p, shape) = (sols[0].1.p, sols[0].1.domain.shape);
    if sols.iter().any(|(_, s)| s.p != p || s.domain.shape != shape) {
        return Err(CliError::validation("all fields must share p and the domain"));
    }
    let kind = match shape {
        Shape::Disk { .. } => "disk_spike_sweep",
        Shape::Rect { .. } => "rect_spike_sweep",
    };
    let eps: Vec<f64> = sols.iter().map(|(_, s)| s.eps).collect();
    let config = ExperimentConfig::from_json(
        &json!({"kind": kind, "p": p, "eps": eps, "domain": shape, "r_compare": r_compare, "roundness_theta": theta})
            .to_string(),
    )?;
    let spec = match &config {
        ExperimentConfig::DiskSpikeSweep(s) | ExperimentConfig::RectSpikeSweep(s) => s,
        ExperimentConfig::EmdenTable(_) => unreachable!("built as a sweep"),
    };
    let e = emden_table(p, spec.emden_tol, spec.emden_samples)?;
    let (paths, sols): (Vec<PathBuf>, Vec<GridSolution>) = sols.into_iter().unzip();
    let report = analyze_sweep(&sols, &e, spec, &config)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|err| CliError::other(format!("cannot create {}: {err}", dir.display())))?;
        write_sweep_outputs(&report, &sols, false, dir)?;
    }
    let spikes = report
        .rows
        .iter()
        .map(|row| {
            row.spikes
                .iter()
                .map(|r| SpikeEntry {
                    eps: r.eps,
                    x: r.x_n,
                    peak: r.peak,
                    t_n: r.t_n,
                    masses: SpikeMasses { pm1: r.ball_mass_pm1, p: r.ball_mass_p },
                    profile_dist: r.profile_dist,
                })
                .collect()
        })
        .collect();
    print_json(&AnalyzeReport {
        fields: paths,
        spikes,
        classification: report.tracks,
        quantization: report.quantization,
        roundness: report.roundness,
    })
}

fn kr(domain: &DomainArgs, points: &str, masses: Option<&str>, find_critical: bool) -> Result<()> {
    let shape = domain.shape()?;
    let points = parse_points(points)?;
    if points.is_empty() {
        return Err(CliError::validation("--points is empty"));
    }
    let masses = match masses {
        Some(m) => parse_masses(m)?,
        None => vec![1.0; points.len()],
    };
    let green = GreenFn::for_shape(shape)?;
    let cfg = KrConfig::new(points, masses);
    let h = kr_hamiltonian(&green, &cfg)?;
    let grad = kr_gradient(&green, &cfg)?;
    let mut report = json!({"H": h, "grad": grad});
    let mut failure = None;
    if find_critical {
        match kr_critical(&green, &cfg, &KrSearch::default()) {
            Ok(c) => {
                report["critical_points"] = json!([{
                    "points": c.config.points, "H": c.hamiltonian, "grad_norm": c.grad_norm, "iterations": c.iterations,
                }]);
            }
            Err(err) => {
                report["critical_points"] = json!([]);
                report["critical_error"] = json!(err.to_string());
                failure = Some(CliError::from(err));
            }
        }
    }
    print_json(&report)?;
    failure.map_or(Ok(()), Err)
}

fn experiment(path: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| CliError::other(format!("cannot read {}: {e}", path.display())))?;
    let config = ExperimentConfig::from_json(&text)?;
    let dir = out.unwrap_or(Path::new("."));
    let report = run(&config, dir)?;
    print_json(&report)
}
