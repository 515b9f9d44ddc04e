//! One-dimensional infinite-mass solutions against closed forms.

use spikelab::entire::{onedim_integral, solve_onedim};
use statrs::function::beta::beta;

/// `t0 = √((p+1)/2) a^{(1−p)/2} B(1/(p+1), 1/2)/(p+1)`, from the first
/// integral `u'² = 2(a^{p+1} − u^{p+1})/(p+1)`.
fn t0_oracle(p: f64, a: f64) -> f64 {
    let q = p + 1.0;
    (q / 2.0).sqrt() * a.powf((1.0 - p) / 2.0) * beta(1.0 / q, 0.5) / q
}

#[test]
fn half_width_matches_beta_function() {
    for p in [1.5, 2.0, 3.0, 5.0] {
        for a in [0.5, 1.0, 2.0] {
            let sol = solve_onedim(p, a, 1e-12).unwrap();
            let want = t0_oracle(p, a);
            assert!((sol.t0 - want).abs() < 1e-10 * want, "p={p} a={a}: {} vs {want}", sol.t0);
        }
    }
}

#[test]
fn p3_half_width_frozen() {
    // √2 · ∫₀¹ ds/√(1−s⁴) = √2 · B(1/4, 1/2)/4.
    let sol = solve_onedim(3.0, 1.0, 1e-12).unwrap();
    assert!((sol.t0 - 1.854_074_677_3).abs() < 1e-9);
    let (integral, err) = onedim_integral(3.0, 1.0, 1e-13).unwrap();
    assert!((integral - 1.311_028_777_146).abs() < 1e-11 && err < 1e-11);
}

#[test]
fn tail_slope_and_energy() {
    let sol = solve_onedim(3.0, 1.0, 1e-12).unwrap();
    assert!((sol.tail_slope() + 0.5f64.sqrt()).abs() < 1e-15);
    // The integrated profile lands on the same slope and on zero.
    let last = sol.table.last().unwrap();
    assert!(last[1].abs() < 1e-9);
    assert!((last[2] - sol.tail_slope()).abs() < 1e-8);
    assert!(sol.first_integral_defect() < 1e-9);
    assert_eq!(sol.eval(0.0), 1.0);
    assert_eq!(sol.eval_derivative(0.0), 0.0);
}

#[test]
fn planar_lift_residual_is_second_order() {
    let sol = solve_onedim(2.0, 1.0, 1e-12).unwrap().with_angle(0.3);
    let window = 1.5 * sol.t0;
    let residual = |n: usize| {
        let h = 2.0 * window / n as f64;
        let mut worst: f64 = 0.0;
        for i in 1..n {
            for j in 1..n {
                let x = [-window + i as f64 * h, -window + j as f64 * h];
                let w = |dx: f64, dy: f64| sol.lift([x[0] + dx, x[1] + dy]);
                let lap = (w(h, 0.0) + w(-h, 0.0) + w(0.0, h) + w(0.0, -h) - 4.0 * w(0.0, 0.0)) / (h * h);
                worst = worst.max((-lap - w(0.0, 0.0).max(0.0).powf(2.0)).abs());
            }
        }
        worst
    };
    let (r1, r2) = (residual(100), residual(200));
    let order = (r1 / r2).log2();
    assert!(order > 1.7, "order {order}: {r1} -> {r2}");
}

#[test]
fn planar_lift_mass_grows_without_bound() {
    let sol = solve_onedim(2.0, 1.0, 1e-12).unwrap();
    let mass = |half: f64| {
        let n = 400;
        let h = 2.0 * half / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h];
                total += sol.lift(x).max(0.0).powf(2.0) * h * h;
            }
        }
        total
    };
    let masses: Vec<f64> = [2.0, 4.0, 8.0, 16.0].iter().map(|&l| mass(l * sol.t0)).collect();
    assert!(masses.windows(2).all(|w| w[1] > 1.8 * w[0]), "{masses:?}");
}
