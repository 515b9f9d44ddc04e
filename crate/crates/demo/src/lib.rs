//! WebAssembly bindings behind `www/index.html`. Each export returns flat
//! `Float64Array`s; the plain functions in [`plots`] carry the logic and
//! are what native tests exercise.

use wasm_bindgen::prelude::*;

pub mod plots;

fn js_err(e: String) -> JsError {
    JsError::new(&e)
}

/// `[φ(0), φ'(1), I_{p−1}, I_p, I_{p+1}, r_0, φ_0, r_1, φ_1, …]` with `n` radial samples.
#[wasm_bindgen]
pub fn emden_profile(p: f64, n: usize) -> Result<Vec<f64>, JsError> {
    plots::emden_profile(p, n).map_err(js_err)
}

/// `[s, θ, |α|, λ, r_0, U_0, r_1, U_1, …]` for the model spike with `a = 1, b = 0`.
#[wasm_bindgen]
pub fn spike_profile(p: f64, eps: f64, n: usize) -> Result<Vec<f64>, JsError> {
    plots::spike_profile(p, eps, n).map_err(js_err)
}

/// Row-major `ny × nx` samples of ℋ for a unit-mass spike moving over the
/// domain's bounding box while `partners` (flat `x, y` pairs) stay fixed;
/// `NaN` outside the domain and on partners. `rect = false` is the unit disk.
#[wasm_bindgen]
pub fn kr_landscape(
    rect: bool,
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    partners: Vec<f64>,
) -> Result<Vec<f64>, JsError> {
    plots::kr_landscape(plots::domain(rect, lx, ly), nx, ny, &partners).map_err(js_err)
}
