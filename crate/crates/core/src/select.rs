//! Choosing λ by maximizing `‖f_λ‖_{L²}`: a dense sweep over a λ grid and an
//! iterative descent that updates λ alongside the steepest-descent iterate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::GriddedData;
use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::solvers::{solve_linear, GDParams};
use crate::spectral::l2_norm_sq;
use crate::weight::{penalty_table, FrequencyWeight};

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) || count < 2 {
        return Err(Error::InvalidParameter(format!(
            "log grid needs 0 < lo < hi and at least 2 points, got [{lo}, {hi}] with {count}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Where the sweep maximum sits on the λ grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakLocation {
    Interior,
    LowerEndpoint,
    UpperEndpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepResult {
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    /// Largest `|f_λ(cell) − a|` over the data cells.
    pub residuals: Vec<f64>,
    pub lambda0: f64,
    pub index0: usize,
    pub peak: PeakLocation,
    pub field0: SpectralField,
}

impl LambdaSweepResult {
    pub fn max_norm(&self) -> f64 {
        self.norms[self.index0]
    }

    /// Writes `lambda,l2_norm,max_residual`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["lambda", "l2_norm", "max_residual"])?;
        for ((l, n), r) in self.lambdas.iter().zip(&self.norms).zip(&self.residuals) {
            w.write_record([l.to_string(), n.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a sweep CSV back as `(lambda, l2_norm, max_residual)` rows.
pub fn read_sweep_csv<R: std::io::Read>(source: R) -> Result<Vec<(f64, f64, f64)>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec.get(j).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Error::Parse {
                line: i + 2,
                message: format!("column {} is not a number", j + 1),
            })
        };
        rows.push((parse(0)?, parse(1)?, parse(2)?));
    }
    Ok(rows)
}

fn sweep_point(data: &GriddedData, fw: &FrequencyWeight, lambda: f64) -> Result<(f64, f64)> {
    let run = || -> Result<(f64, f64)> {
        let (field, report) = solve_linear(data, &fw.with_lambda(lambda)?)?;
        Ok((l2_norm_sq(&field).sqrt(), report.max_abs_residual()))
    };
    run().map_err(|e| Error::AtLambda {
        lambda,
        source: Box::new(e),
    })
}

/// Solves at every λ of `lambdas` and picks the largest norm, preferring the
/// smallest λ among ties.
pub fn sweep_lambda(data: &GriddedData, template: &FrequencyWeight, lambdas: &[f64]) -> Result<LambdaSweepResult> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("λ grid is empty".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("λ grid must be positive and strictly increasing".into()));
    }

    #[cfg(feature = "parallel")]
    let points: Vec<Result<(f64, f64)>> = {
        use rayon::prelude::*;
        lambdas.par_iter().map(|&l| sweep_point(data, template, l)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<Result<(f64, f64)>> = lambdas.iter().map(|&l| sweep_point(data, template, l)).collect();

    let (norms, residuals): (Vec<f64>, Vec<f64>) = points.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let mut index0 = 0;
    for (i, &n) in norms.iter().enumerate() {
        if n > norms[index0] {
            index0 = i;
        }
    }
    let peak = if index0 == 0 {
        PeakLocation::LowerEndpoint
    } else if index0 == lambdas.len() - 1 {
        PeakLocation::UpperEndpoint
    } else {
        PeakLocation::Interior
    };
    if peak != PeakLocation::Interior && lambdas.len() > 1 {
        log::warn!("λ sweep maximum at the {peak:?} of the grid, λ = {:e}", lambdas[index0]);
    }
    let lambda0 = lambdas[index0];
    let (field0, _) = solve_linear(data, &template.with_lambda(lambda0)?)?;
    Ok(LambdaSweepResult {
        lambdas: lambdas.to_vec(),
        norms,
        residuals,
        lambda0,
        index0,
        peak,
        field0,
    })
}

/// `q(λ) = c0 + c1·λ + c2·λ²`, the squared mean-square norm of a one-step
/// update as a function of λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormQuadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl NormQuadratic {
    pub fn eval(&self, lambda: f64) -> f64 {
        self.c0 + lambda * (self.c1 + lambda * self.c2)
    }

    /// Stationary point, if the quadratic term is nonzero.
    pub fn vertex(&self) -> Option<f64> {
        (self.c2 != 0.0).then(|| -self.c1 / (2.0 * self.c2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootKind {
    /// Interior maximum of the quadratic.
    Vertex,
    /// No interior maximum; the better bracket end.
    Endpoint,
    /// No λ dependence; `λ_lo` returned.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRoot {
    pub lambda: f64,
    pub kind: RootKind,
    pub quadratic: NormQuadratic,
}

impl NormRoot {
    pub fn flagged(&self) -> bool {
        self.kind != RootKind::Vertex
    }
}

fn mean_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Picks λ in `bracket` maximizing `‖f − δ∇C_λ(f)‖`.
///
/// The gradient is affine in λ, so with `u = f − δ[(2/N)f + 2D(f − a)]` and
/// `v = δ(2/N)·P f` the update is `u − λv` and its squared norm a quadratic.
pub fn norm_derivative_root(
    field: &SpectralField,
    data: &GriddedData,
    template: &FrequencyWeight,
    delta: f64,
    bracket: (f64, f64),
) -> Result<NormRoot> {
    field.grid().ensure_same(data.grid())?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad bracket ({lo}, {hi})")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {delta}")));
    }
    let grid = field.grid();
    let scale = 2.0 / grid.total() as f64;
    let (counts, targets) = data.dense_weights();
    let f = field.values();
    let u: Vec<f64> = f
        .iter()
        .zip(counts.iter().zip(&targets))
        .map(|(x, (n, a))| x - delta * (scale * x + 2.0 * n * (x - a)))
        .collect();
    let pf = fft::apply_multiplier(grid, f, &penalty_table(grid, template.k, template.scale));
    let v: Vec<f64> = pf.iter().map(|p| delta * scale * p).collect();
    let quadratic = NormQuadratic {
        c0: mean_dot(&u, &u),
        c1: -2.0 * mean_dot(&u, &v),
        c2: mean_dot(&v, &v),
    };
    if quadratic.c2 == 0.0 && quadratic.c1 == 0.0 {
        return Ok(NormRoot {
            lambda: lo,
            kind: RootKind::Degenerate,
            quadratic,
        });
    }
    if let Some(x) = quadratic.vertex() {
        if quadratic.c2 < 0.0 && (lo..=hi).contains(&x) {
            return Ok(NormRoot {
                lambda: x,
                kind: RootKind::Vertex,
                quadratic,
            });
        }
    }
    let lambda = if quadratic.eval(lo) >= quadratic.eval(hi) { lo } else { hi };
    Ok(NormRoot {
        lambda,
        kind: RootKind::Endpoint,
        quadratic,
    })
}

/// Settings for [`select_lambda_descent`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub lambda_init: f64,
    pub bracket: (f64, f64),
    /// One λ update stays within `[λ/trust, λ·trust]`.
    pub trust: f64,
    /// λ moves only once `‖∇C‖ ≤ gate·‖2Da‖`.
    pub gate: f64,
    pub lambda_tol: f64,
    pub norm_tol: f64,
    /// Stationarity threshold, relative to `‖2Da‖`.
    pub grad_tol: f64,
    /// Consecutive stationary iterations required.
    pub patience: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            lambda_init: 1.0,
            bracket: (1e-8, 1e8),
            trust: 2.0,
            gate: 1e-3,
            lambda_tol: 1e-4,
            norm_tol: 1e-6,
            grad_tol: 1e-8,
            patience: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentState {
    pub field: SpectralField,
    pub lambda_current: f64,
    pub iterations: usize,
    pub norm_trace: Vec<f64>,
    pub lambda_trace: Vec<f64>,
    pub converged: bool,
    /// Number of λ updates that fell back to a trust-region endpoint.
    pub endpoint_fallbacks: usize,
}

/// Steepest descent on the samples with λ re-chosen as it goes.
///
/// Alongside the iterate `A` the first and second λ-derivatives `B`, `C` of
/// the iterate are propagated through each step. Once the gradient is below
/// the gate, λ moves to the maximizer of the second-order model
/// `‖A' + εB' + ε²C'/2‖²` within the trust interval, and the iterate is
/// re-expanded around the new λ.
pub fn select_lambda_descent(
    data: &GriddedData,
    template: &FrequencyWeight,
    params: &GDParams,
    options: &DescentOptions,
) -> Result<(f64, SpectralField, DescentState)> {
    params.validate()?;
    let (lo, hi) = options.bracket;
    if !(options.lambda_init > 0.0 && lo > 0.0 && hi > lo && options.trust > 1.0) {
        return Err(Error::InvalidParameter("descent needs λ_init > 0, 0 < lo < hi and trust > 1".into()));
    }
    let grid = data.grid().clone();
    let n = grid.total();
    let mut lambda = options.lambda_init.clamp(lo, hi);
    let mut state = DescentState {
        field: SpectralField::zeros(grid.clone()),
        lambda_current: lambda,
        iterations: 0,
        norm_trace: Vec::new(),
        lambda_trace: Vec::new(),
        converged: false,
        endpoint_fallbacks: 0,
    };
    if data.is_empty() {
        state.converged = true;
        state.norm_trace.push(0.0);
        state.lambda_trace.push(lambda);
        return Ok((lambda, state.field.clone(), state));
    }

    let penalty = penalty_table(&grid, template.k, template.scale);
    let pmax = penalty.iter().cloned().fold(0.0, f64::max);
    let (counts, targets) = data.dense_weights();
    let nmax = counts.iter().cloned().fold(0.0, f64::max);
    let scale = 2.0 / n as f64;
    let data_grad: f64 = counts
        .iter()
        .zip(&targets)
        .map(|(c, a)| (2.0 * c * a).powi(2))
        .sum::<f64>()
        .sqrt();
    let gate = options.gate * data_grad;
    let stationary = (options.grad_tol * data_grad).max(f64::MIN_POSITIVE);

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut prev: Option<(f64, f64)> = None;
    let mut stable = 0;

    for it in 0..params.max_iters {
        let pa = fft::apply_multiplier(&grid, &a, &penalty);
        let pb = fft::apply_multiplier(&grid, &b, &penalty);
        let pc = fft::apply_multiplier(&grid, &c, &penalty);
        let grad: Vec<f64> = (0..n)
            .map(|i| scale * (a[i] + lambda * pa[i]) + 2.0 * counts[i] * (a[i] - targets[i]))
            .collect();
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();

        if let Some((dl, dn)) = prev {
            if dl <= options.lambda_tol && dn <= options.norm_tol && grad_norm <= stationary {
                stable += 1;
            } else {
                stable = 0;
            }
            if stable >= options.patience {
                state.converged = true;
                break;
            }
        }

        let step = 1.0 / (2.0 * ((1.0 + lambda * pmax) / n as f64 + nmax));
        let mut a2 = vec![0.0; n];
        let mut b2 = vec![0.0; n];
        let mut c2 = vec![0.0; n];
        for i in 0..n {
            let hb = scale * (b[i] + lambda * pb[i]) + 2.0 * counts[i] * b[i];
            let hc = scale * (c[i] + lambda * pc[i]) + 2.0 * counts[i] * c[i];
            a2[i] = a[i] - step * grad[i];
            b2[i] = b[i] - step * (hb + scale * pa[i]);
            c2[i] = c[i] - step * (hc + 2.0 * scale * pb[i]);
        }

        let mut next = lambda;
        if grad_norm <= gate {
            let c1 = 2.0 * mean_dot(&a2, &b2);
            let cc = mean_dot(&b2, &b2) + mean_dot(&a2, &c2);
            let model = |l: f64| {
                let e = l - lambda;
                e * (c1 + e * cc)
            };
            let t_lo = (lambda / options.trust).max(lo);
            let t_hi = (lambda * options.trust).min(hi);
            if c1 != 0.0 || cc != 0.0 {
                let vertex = lambda - c1 / (2.0 * cc);
                next = if cc < 0.0 && (t_lo..=t_hi).contains(&vertex) {
                    vertex
                } else {
                    state.endpoint_fallbacks += 1;
                    if model(t_lo) >= model(t_hi) {
                        t_lo
                    } else {
                        t_hi
                    }
                };
            }
        }

        let e = next - lambda;
        for i in 0..n {
            a[i] = a2[i] + e * b2[i] + 0.5 * e * e * c2[i];
            b[i] = b2[i] + e * c2[i];
        }
        c = c2;
        let norm = mean_dot(&a, &a).sqrt();
        if !norm.is_finite() {
            return Err(Error::Divergence {
                learning_rate: step,
                bound: 2.0 * step,
            });
        }
        let dl = e.abs() / lambda;
        let dn = match state.norm_trace.last() {
            Some(&p) if p > 0.0 => (norm - p).abs() / p,
            Some(_) if norm == 0.0 => 0.0,
            _ => f64::INFINITY,
        };
        prev = Some((dl, dn));
        lambda = next;
        state.norm_trace.push(norm);
        state.lambda_trace.push(lambda);
        state.iterations = it + 1;
    }
    if !state.converged {
        log::warn!("λ descent stopped after {} iterations at λ = {lambda:e}", state.iterations);
    }
    state.lambda_current = lambda;
    state.field = SpectralField::from_values(grid, a)?;
    Ok((lambda, state.field.clone(), state))
}
