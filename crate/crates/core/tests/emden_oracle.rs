//! Emden profile against an independent fixed-step RK4 shooting oracle with
//! Richardson extrapolation, whose results are frozen below.

use spikelab::emden::{solve_emden_with, EmdenConfig};
use spikelab::solve_emden;
use std::f64::consts::PI;

/// State `(u, u', ∫u^{p−1} r, ∫u^p r, ∫u^{p+1} r)` of the `u(0) = 1` problem.
type State = [f64; 5];

fn rhs(p: f64, r: f64, y: &State) -> State {
    let u = y[0].max(0.0);
    [y[1], -y[1] / r - u.powf(p), u.powf(p - 1.0) * r, u.powf(p) * r, u.powf(p + 1.0) * r]
}

fn rk4(p: f64, r: f64, y: &State, h: f64) -> State {
    let add = |a: &State, b: &State, s: f64| -> State { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = rhs(p, r, y);
    let k2 = rhs(p, r + h / 2.0, &add(y, &k1, h / 2.0));
    let k3 = rhs(p, r + h / 2.0, &add(y, &k2, h / 2.0));
    let k4 = rhs(p, r + h, &add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Shoots with step `h` and returns `(r0, u'(r0), masses)`; the last
/// partial step is found by secant iteration on the step length.
fn shoot(p: f64, h: f64) -> (f64, f64, [f64; 3]) {
    // Taylor start at r = h; the masses pick up their O(h²) head analytically.
    let r_start = h;
    let r2 = r_start * r_start;
    let u = 1.0 - r2 / 4.0 + p / 64.0 * r2 * r2;
    let du = -r_start / 2.0 + p / 16.0 * r2 * r_start;
    let mut y: State = [u, du, r2 / 2.0, r2 / 2.0, r2 / 2.0];
    let mut r = r_start;
    loop {
        let next = rk4(p, r, &y, h);
        if next[0] <= 0.0 {
            let (mut a, mut b) = (0.0, h);
            let (mut fa, mut fb) = (y[0], next[0]);
            for _ in 0..60 {
                let c = b - fb * (b - a) / (fb - fa);
                let fc = rk4(p, r, &y, c)[0];
                a = b;
                fa = fb;
                b = c;
                fb = fc;
                if fc.abs() < 1e-15 {
                    break;
                }
            }
            let end = rk4(p, r, &y, b);
            return (r + b, end[1], [end[2], end[3], end[4]]);
        }
        y = next;
        r += h;
    }
}

struct Oracle {
    phi0: f64,
    dphi1: f64,
    masses: [f64; 3],
}

fn oracle(p: f64) -> Oracle {
    let h = 2e-3;
    let coarse = shoot(p, h);
    let fine = shoot(p, h / 2.0);
    let rich = |a: f64, b: f64| (16.0 * b - a) / 15.0;
    let r0 = rich(coarse.0, fine.0);
    let du = rich(coarse.1, fine.1);
    let k = 2.0 / (p - 1.0);
    let masses: [f64; 3] = std::array::from_fn(|i| {
        let q = p - 1.0 + i as f64;
        2.0 * PI * r0.powf(k * q - 2.0) * rich(coarse.2[i], fine.2[i])
    });
    Oracle { phi0: r0.powf(k), dphi1: r0.powf(k + 1.0) * du, masses }
}

/// `(p, φ(0), φ'(1), I_{p−1}, I_p, I_{p+1})` from the oracle above.
const FROZEN: [(f64, f64, f64, f64, f64, f64); 3] = [
    (2.0, 8.534114771, -7.897071013, 10.01671157, 49.61876056, 293.8821568),
    (3.0, 3.573900982, -2.645123173, 7.014816606, 16.61979906, 43.96141563),
    (5.0, 2.329715559, -1.240211046, 4.431298155, 7.792475822, 14.49647189),
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn oracle_reproduces_frozen_values() {
    for (p, phi0, dphi1, i0, i1, i2) in FROZEN {
        let o = oracle(p);
        assert!(rel(o.phi0, phi0) < 1e-8, "p={p} phi0 {}", o.phi0);
        assert!(rel(o.dphi1, dphi1) < 1e-8, "p={p} dphi1 {}", o.dphi1);
        for (m, f) in o.masses.iter().zip([i0, i1, i2]) {
            assert!(rel(*m, f) < 1e-8, "p={p} mass {m} vs {f}");
        }
    }
}

#[test]
fn solver_matches_frozen_oracle() {
    for (p, phi0, dphi1, i0, i1, i2) in FROZEN {
        let e = solve_emden(p, 1e-10).unwrap();
        assert!(rel(e.phi0, phi0) < 1e-8, "p={p}");
        assert!(rel(e.dphi1, dphi1) < 1e-8, "p={p}");
        assert!(rel(e.i_pm1, i0) < 1e-8, "p={p}");
        assert!(rel(e.i_p, i1) < 1e-8, "p={p}");
        assert!(rel(e.i_pp1, i2) < 1e-8, "p={p}");
    }
}

#[test]
fn interior_values_are_bracketed() {
    let e = solve_emden(2.0, 1e-10).unwrap();
    assert!(e.eval_phi(1.0).unwrap().abs() < 1e-10);
    assert_eq!(e.eval_phi(0.0).unwrap(), e.phi0);
    let mid = e.eval_phi(0.5).unwrap();
    assert!(0.0 < mid && mid < e.phi0);
}

#[test]
fn residual_constant_is_reported_and_bounded() {
    for p in [1.5, 2.0, 3.0, 5.0] {
        let e = solve_emden(p, 1e-10).unwrap();
        assert!(e.residual_constant.is_finite() && e.residual_constant > 0.0);
        let (c1, h1) = e.radial_residual_constant(200);
        let (c2, h2) = e.radial_residual_constant(100);
        assert!(h2 < h1);
        // The constant stays bounded under refinement: the residual is O(h²).
        assert!(c2 < 2.0 * c1 + 1.0, "p={p}: {c1} -> {c2}");
    }
}

#[test]
fn table_refinement_is_second_order_or_better() {
    for p in [2.0, 3.0] {
        let run = |n: usize| solve_emden_with(p, 1e-12, &EmdenConfig { samples: n, ..Default::default() }).unwrap();
        let (a, b, c) = (run(500), run(1000), run(2000));
        for f in [
            |e: &spikelab::EmdenSolution| e.i_pm1,
            |e: &spikelab::EmdenSolution| e.i_p,
            |e: &spikelab::EmdenSolution| e.i_pp1,
        ] {
            let (d1, d2) = ((f(&a) - f(&b)).abs(), (f(&b) - f(&c)).abs());
            if d2 > 1e-13 * f(&c) {
                assert!(d1 / d2 >= 4.0 * 0.9, "p={p}: order {}", (d1 / d2).log2());
            }
        }
    }
}
