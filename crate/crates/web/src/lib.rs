//! Browser bindings for one-dimensional fits on the periodic unit interval.
//!
//! The plain functions return library errors and are what the native tests
//! call; the `#[wasm_bindgen]` wrappers convert those errors to JS exceptions.

use sobolev_fit::{
    bin_to_grid, kernel_value, log_space, solve_linear, sweep_lambda, Dataset, FrequencyWeight, GridSpec, Result,
    ScaleMode,
};
use wasm_bindgen::prelude::*;

fn dataset(xs: &[f64], ys: &[f64]) -> Result<Dataset> {
    Dataset::new(1, xs.iter().map(|&x| vec![x]).collect(), ys.to_vec())
}

/// Fitted values on `samples` grid points, in the units of `ys`.
pub fn curve(xs: &[f64], ys: &[f64], samples: usize, k: u32, lambda: f64) -> Result<Vec<f64>> {
    let data = dataset(xs, ys)?;
    let grid = GridSpec::new(vec![samples])?;
    let fw = FrequencyWeight::new(k, lambda, ScaleMode::TwoPi)?;
    let (field, _) = solve_linear(&bin_to_grid(&data, &grid)?, &fw)?;
    let offset = data.mean_offset();
    Ok(field.values().iter().map(|v| v + offset).collect())
}

/// Sweep over `count` log-spaced λ in `[10^lo_exp, 10^hi_exp]`.
pub fn sweep_view(
    xs: &[f64],
    ys: &[f64],
    samples: usize,
    k: u32,
    lo_exp: f64,
    hi_exp: f64,
    count: usize,
) -> Result<SweepView> {
    let data = dataset(xs, ys)?;
    let grid = GridSpec::new(vec![samples])?;
    let template = FrequencyWeight::new(k, 1.0, ScaleMode::TwoPi)?;
    let lambdas = log_space(10f64.powf(lo_exp), 10f64.powf(hi_exp), count)?;
    let result = sweep_lambda(&bin_to_grid(&data, &grid)?, &template, &lambdas)?;
    let offset = data.mean_offset();
    Ok(SweepView {
        curve: result.field0.values().iter().map(|v| v + offset).collect(),
        lambdas: result.lambdas,
        norms: result.norms,
        lambda0: result.lambda0,
    })
}

/// Kernel `g(x)` at `samples` points of `[0, 1)`, summed over `|η_i| ≤ trunc`.
pub fn kernel_values(k: u32, lambda: f64, samples: usize, trunc: usize) -> Result<Vec<f64>> {
    let fw = FrequencyWeight::new(k, lambda, ScaleMode::TwoPi)?;
    (0..samples)
        .map(|j| kernel_value(&[j as f64 / samples as f64], &fw, trunc))
        .collect()
}

fn js(e: sobolev_fit::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct SweepView {
    lambdas: Vec<f64>,
    norms: Vec<f64>,
    lambda0: f64,
    curve: Vec<f64>,
}

#[wasm_bindgen]
impl SweepView {
    #[wasm_bindgen(getter)]
    pub fn lambdas(&self) -> Vec<f64> {
        self.lambdas.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn norms(&self) -> Vec<f64> {
        self.norms.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// Fit at `lambda0`.
    #[wasm_bindgen(getter)]
    pub fn curve(&self) -> Vec<f64> {
        self.curve.clone()
    }
}

#[wasm_bindgen(js_name = fitCurve)]
pub fn fit_curve(xs: &[f64], ys: &[f64], samples: usize, k: u32, log_lambda: f64) -> std::result::Result<Vec<f64>, JsError> {
    curve(xs, ys, samples, k, 10f64.powf(log_lambda)).map_err(js)
}

#[wasm_bindgen]
pub fn sweep(
    xs: &[f64],
    ys: &[f64],
    samples: usize,
    k: u32,
    lo_exp: f64,
    hi_exp: f64,
    count: usize,
) -> std::result::Result<SweepView, JsError> {
    sweep_view(xs, ys, samples, k, lo_exp, hi_exp, count).map_err(js)
}

#[wasm_bindgen(js_name = kernelProfile)]
pub fn kernel_profile(k: u32, log_lambda: f64, samples: usize, trunc: usize) -> std::result::Result<Vec<f64>, JsError> {
    kernel_values(k, 10f64.powf(log_lambda), samples, trunc).map_err(js)
}
