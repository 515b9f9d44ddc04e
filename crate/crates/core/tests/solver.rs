//! Newton solver and continuation sweeps on coarse grids.

use spikelab::solver::{continuation_sweep, multi_spike_ansatz, solve, GridPolicy, SweepConfig, WarmStart};
use spikelab::{solve_emden, GridDomain, InitialGuess, Shape, SolverConfig, SolverError, UNIT_AREA_RADIUS};
use std::sync::Arc;

fn coarse(warm_start: WarmStart) -> SweepConfig {
    SweepConfig {
        grid: GridPolicy { n_min: 24, n_max: 96, min_cells_per_spike: 4.0, cells_ramp: 0.0 },
        warm_start,
        ..Default::default()
    }
}

fn disk_sweep(warm_start: WarmStart) -> Vec<spikelab::GridSolution> {
    let emden = Arc::new(solve_emden(2.0, 1e-10).unwrap());
    let init = InitialGuess::Profiles { emden: emden.clone(), centers: vec![[0.0, 0.0]], a: 1.0, b: 0.0 };
    let shape = Shape::Disk { radius: UNIT_AREA_RADIUS };
    continuation_sweep(shape, emden, &[0.06, 0.05, 0.04], &init, &coarse(warm_start)).unwrap()
}

#[test]
fn sweep_converges_with_decreasing_peak() {
    let sols = disk_sweep(WarmStart::Reseed);
    assert!(sols.iter().all(|s| s.converged));
    for s in &sols {
        assert!(s.discrete_residual() <= 1e-9);
        assert!(s.v.iter().all(|&v| v >= -1e-8));
        let c = s.argmax();
        assert!(c[0].hypot(c[1]) < 2.0 * s.domain.h);
    }
    // The peak is about 1 + φ(0)/θ and θ grows as ε shrinks.
    assert!(sols.iter().all(|s| s.v_max() > 1.0));
    assert!(sols.windows(2).all(|w| w[1].v_max() < w[0].v_max()));
}

#[test]
fn field_warm_start_reaches_the_same_solutions() {
    let a = disk_sweep(WarmStart::Reseed);
    let b = disk_sweep(WarmStart::Field);
    for (x, y) in a.iter().zip(&b) {
        assert!(y.converged);
        assert_eq!(x.v.len(), y.v.len());
        let diff = x.v.iter().zip(&y.v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6 * x.v_max(), "{diff}");
    }
}

#[test]
fn recovered_parameters_satisfy_their_definitions() {
    for s in disk_sweep(WarmStart::Reseed) {
        let par = s.recover_parameters().unwrap();
        let p = s.p;
        let mass = s.plasma_integral(p);
        assert!((mass * (-par.alpha).powf(p) - 1.0).abs() < 1e-12);
        assert!((s.eps * s.eps * (-par.alpha).powf(p - 1.0) * par.lambda - 1.0).abs() < 1e-12);
        assert!(par.alpha < 0.0 && par.gamma < 0.0);
        // ψ solves the constrained problem up to the discrete residual.
        let psi = s.psi().unwrap();
        let k = -par.alpha / par.lambda;
        assert!((psi[0] - k * s.v[0]).abs() < 1e-15);
    }
}

#[test]
fn zero_start_converges_to_the_trivial_solution() {
    let d = Arc::new(GridDomain::new(Shape::Rect { lx: 2.0, ly: 1.0 }, 16).unwrap());
    let sol = solve(d, 2.0, 0.05, &InitialGuess::Zero, &SolverConfig::default()).unwrap();
    assert!(sol.converged && sol.v_max() == 0.0);
    assert!(matches!(sol.recover_parameters(), Err(SolverError::ZeroPlasma)));
}

#[test]
fn ansatz_matches_model_profile_on_the_disk() {
    let emden = Arc::new(solve_emden(2.0, 1e-10).unwrap());
    let d = GridDomain::new(Shape::Disk { radius: UNIT_AREA_RADIUS }, 40).unwrap();
    let prof = spikelab::profile::build_profile(emden.clone(), 0.05, 1.0, 0.0, 1e-13).unwrap();
    let v = multi_spike_ansatz(&d, &emden, 0.05, &[[0.0, 0.0]], 1.0, 0.0).unwrap();
    for &k in &d.interior {
        let m = prof.eval(d.coords(k));
        assert!((v[k] - m).abs() < 1e-8 * m.abs().max(1.0), "{} vs {m}", v[k]);
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let d = Arc::new(GridDomain::new(Shape::Disk { radius: 1.0 }, 8).unwrap());
    let cfg = SolverConfig::default();
    assert!(matches!(solve(d.clone(), 1.0, 0.1, &InitialGuess::Zero, &cfg), Err(SolverError::InvalidInput(_))));
    assert!(matches!(solve(d, 2.0, 0.0, &InitialGuess::Zero, &cfg), Err(SolverError::InvalidInput(_))));
    let emden = Arc::new(solve_emden(2.0, 1e-10).unwrap());
    let shape = Shape::Disk { radius: 1.0 };
    assert!(continuation_sweep(shape, emden.clone(), &[0.05, 0.06], &InitialGuess::Zero, &coarse(WarmStart::Field))
        .is_err());
    assert!(continuation_sweep(shape, emden, &[], &InitialGuess::Zero, &coarse(WarmStart::Field)).is_err());
}
