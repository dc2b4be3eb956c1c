//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every entry point returns a JSON string; the plain-Rust versions in
//! [`demo`] are what the bindings wrap.

use wasm_bindgen::prelude::*;

pub mod demo;

/// Sobol-g subspace pipeline; see [`demo::sobol_subspace`].
#[wasm_bindgen(js_name = sobolSubspace)]
pub fn sobol_subspace(m: usize, n_train: usize, n_mcs: usize, mu: f64, seed: u32) -> Result<String, JsError> {
    demo::sobol_subspace(m, n_train, n_mcs, mu, u64::from(seed)).map_err(|e| JsError::new(&e))
}

/// One-dimensional H-PCFE fit; see [`demo::hpcfe_curve`].
#[wasm_bindgen(js_name = hpcfeCurve)]
pub fn hpcfe_curve(xs: Vec<f64>, ys: Vec<f64>, degree: usize, points: usize) -> Result<String, JsError> {
    demo::hpcfe_curve(&xs, &ys, degree, points).map_err(|e| JsError::new(&e))
}

/// Density and distribution of one marginal; see [`demo::marginal_curve`].
#[wasm_bindgen(js_name = marginalCurve)]
pub fn marginal_curve(kind: &str, mean: f64, sd: f64, lo: f64, hi: f64, points: usize) -> Result<String, JsError> {
    demo::marginal_curve(kind, mean, sd, lo, hi, points).map_err(|e| JsError::new(&e))
}
