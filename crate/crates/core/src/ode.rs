//! Adaptive Dormand–Prince 5(4) integration for small fixed-size systems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {max_steps} steps before reaching t = {target}")]
    TooManySteps { max_steps: usize, target: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 5_000_000, h_min: 1e-300 }
    }
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Default::default() }
    }

    /// One trial step; returns the 5th-order update and the scaled error norm.
    pub fn trial_step<F, const N: usize>(&self, f: &F, t: f64, y: &[f64; N], h: f64) -> ([f64; N], f64)
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let k1 = f(t, y);
        let k2 = f(t + C2 * h, &axpy(y, &[(A21, &k1)], h));
        let k3 = f(t + C3 * h, &axpy(y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(t + C5 * h, &axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(t + h, &axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y_new = axpy(y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y_new);
        let mut err = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        (y_new, (err / N as f64).sqrt())
    }

    /// Integrates from `t0` to exactly `t1`, adapting the step. `h` carries the
    /// step-size suggestion between calls.
    pub fn integrate<F, const N: usize>(
        &self,
        f: &F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        h: &mut f64,
    ) -> Result<[f64; N], OdeError>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut t = t0;
        let mut y = y0;
        let dir = (t1 - t0).signum();
        if t1 == t0 {
            return Ok(y);
        }
        let mut steps = 0usize;
        while (t1 - t) * dir > 0.0 {
            if steps >= self.max_steps {
                return Err(OdeError::TooManySteps { max_steps: self.max_steps, target: t1 });
            }
            steps += 1;
            let remaining = t1 - t;
            let mut step = h.abs().min(remaining.abs()) * dir;
            // Land exactly on t1 instead of leaving a sliver.
            if (remaining - step).abs() < 1e-12 * remaining.abs() {
                step = remaining;
            }
            let (y_new, err) = self.trial_step(f, t, &y, step);
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                *h = step.abs() * 0.1;
                if *h < self.h_min {
                    return Err(OdeError::NonFinite { t });
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if step == remaining { t1 } else { t + step };
                y = y_new;
                // A short landing step should not shrink the next suggestion.
                let proposal = step.abs() * factor;
                *h = if step.abs() < h.abs() { proposal.max(h.abs()) } else { proposal };
            } else {
                *h = step.abs() * factor;
                if *h < self.h_min {
                    return Err(OdeError::StepUnderflow { t, h: *h });
                }
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_full_period() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let dp = Dopri5::new(1e-12, 1e-14);
        let mut h = 1e-3;
        let y = dp.integrate(&f, 0.0, [1.0, 0.0], 2.0 * std::f64::consts::PI, &mut h).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
        assert!(y[1].abs() < 1e-10);
    }

    #[test]
    fn exponential_growth_matches_closed_form() {
        let f = |_t: f64, y: &[f64; 1]| [y[0]];
        let dp = Dopri5::new(1e-11, 1e-13);
        let mut h = 0.1;
        let mut y = [1.0];
        let mut t = 0.0;
        for k in 1..=10 {
            let t1 = k as f64 * 0.3;
            y = dp.integrate(&f, t, y, t1, &mut h).unwrap();
            t = t1;
        }
        assert!((y[0] - 3.0f64.exp()).abs() / 3.0f64.exp() < 1e-9);
    }
}
