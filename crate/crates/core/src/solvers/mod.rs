//! Three routes to the minimizer: gradient descent over grid samples, the
//! direct linear solve, and the closed-form kernel expansion.

mod gd;
mod kernel;
mod linear;

use serde::{Deserialize, Serialize};

pub use gd::{solve_gd, stability_bound, GDParams};
pub use kernel::{default_truncation, kernel_predict, kernel_value, solve_kernel, KernelModel};
pub use linear::{solve_linear, solve_linear_with, LinearMethod, LinearSystem};

use crate::data::GriddedData;
use crate::error::Result;
use crate::field::SpectralField;
use crate::spectral::{kgrad_norm_sq, l2_norm_sq, objective};
use crate::weight::{FrequencyWeight, ScaleMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Gd,
    Linear,
    Kernel,
}

/// Diagnostics of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub solver: SolverKind,
    pub lambda: f64,
    pub k: u32,
    pub scale: ScaleMode,
    pub iterations: usize,
    pub final_objective: f64,
    pub objective_trace: Vec<f64>,
    /// `f(p_i) − a_i`, one per data cell (grid solvers) or point (kernel).
    pub data_residuals: Vec<f64>,
    pub l2_norm: f64,
    pub kgrad_norm: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
}

impl FitReport {
    pub(crate) fn for_grid_field(
        solver: SolverKind,
        field: &SpectralField,
        data: &GriddedData,
        fw: &FrequencyWeight,
        iterations: usize,
        objective_trace: Vec<f64>,
        converged: bool,
    ) -> Result<Self> {
        let final_objective = objective(field, data, fw)?;
        Ok(Self {
            solver,
            lambda: fw.lambda,
            k: fw.k,
            scale: fw.scale,
            iterations,
            final_objective,
            objective_trace,
            data_residuals: data.entries().map(|(i, d)| field.value_at(i) - d.value).collect(),
            l2_norm: l2_norm_sq(field).sqrt(),
            kgrad_norm: kgrad_norm_sq(field, fw).sqrt(),
            converged,
            gradient_norm: None,
            learning_rate: None,
            truncation: None,
            tail_bound: None,
        })
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.data_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
