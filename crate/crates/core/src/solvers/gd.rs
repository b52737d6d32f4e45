use serde::{Deserialize, Serialize};

use super::{FitReport, SolverKind};
use crate::data::GriddedData;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::spectral::Quadratic;
use crate::weight::FrequencyWeight;

/// Steepest-descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GDParams {
    /// Step size; `None` picks `1 / L` for the Hessian bound `L`.
    pub learning_rate: Option<f64>,
    pub max_iters: usize,
    /// Euclidean norm of the sample gradient.
    pub grad_tol: f64,
    /// Relative objective change between steps; `0` disables the test.
    /// Near the optimum the change falls below rounding well before the
    /// iterate settles, so a positive value trades accuracy for speed.
    pub objective_tol: f64,
}

impl Default for GDParams {
    fn default() -> Self {
        Self {
            learning_rate: None,
            max_iters: 500_000,
            grad_tol: 1e-10,
            objective_tol: 0.0,
        }
    }
}

impl GDParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidParameter(format!("learning rate must be positive, got {lr}")));
            }
        }
        if !(self.grad_tol > 0.0 && self.objective_tol >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be non-negative, grad_tol positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Largest stable step `2 / L`, with `L = 2·(max w / N + max count)`.
pub fn stability_bound(data: &GriddedData, fw: &FrequencyWeight) -> f64 {
    2.0 / Quadratic::new(data, fw).lipschitz()
}

const DIVERGENCE_STREAK: usize = 5;
const ROUNDING_SLACK: f64 = 1e-12;

/// Minimizes the objective by fixed-step steepest descent from the zero field.
///
/// Stops when the gradient norm drops below `grad_tol` or the relative
/// objective change below `objective_tol`. Five consecutive objective
/// increases abort with [`Error::Divergence`]; running out of iterations
/// returns the last iterate with `converged = false`.
pub fn solve_gd(
    data: &GriddedData,
    fw: &FrequencyWeight,
    params: &GDParams,
) -> Result<(SpectralField, FitReport)> {
    params.validate()?;
    let grid = data.grid().clone();
    fw.warn_if_subcritical(grid.dim());
    let q = Quadratic::new(data, fw);
    let bound = 2.0 / q.lipschitz();
    let step = params.learning_rate.unwrap_or(bound / 2.0);

    let mut values = vec![0.0; grid.total()];
    let (mut current, mut grad) = q.evaluate(&values);
    let mut trace = vec![current];
    let mut converged = false;
    let mut increases = 0;
    let mut iterations = 0;
    let mut grad_norm = norm(&grad);

    while iterations < params.max_iters {
        if grad_norm <= params.grad_tol {
            converged = true;
            break;
        }
        for (v, g) in values.iter_mut().zip(&grad) {
            *v -= step * g;
        }
        iterations += 1;
        let (next, next_grad) = q.evaluate(&values);
        trace.push(next);
        if !next.is_finite() {
            return Err(Error::Divergence {
                learning_rate: step,
                bound,
            });
        }
        if next > current + ROUNDING_SLACK * current.abs() {
            increases += 1;
            if increases >= DIVERGENCE_STREAK {
                return Err(Error::Divergence {
                    learning_rate: step,
                    bound,
                });
            }
        } else {
            increases = 0;
        }
        let change = (current - next).abs();
        current = next;
        grad = next_grad;
        grad_norm = norm(&grad);
        if change < params.objective_tol * current.abs() {
            converged = true;
            break;
        }
    }
    if !converged && grad_norm <= params.grad_tol {
        converged = true;
    }
    if !converged {
        log::warn!("gradient descent stopped after {iterations} iterations with gradient norm {grad_norm:e}");
    }

    let field = SpectralField::from_values(grid, values)?;
    let mut report = FitReport::for_grid_field(SolverKind::Gd, &field, data, fw, iterations, trace, converged)?;
    report.gradient_norm = Some(grad_norm);
    report.learning_rate = Some(step);
    Ok((field, report))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
