use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FitReport, SolverKind};
use crate::data::GriddedData;
use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::weight::{penalty_table, FrequencyWeight};

use rustfft::num_complex::Complex64;

/// How the normal equations are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearMethod {
    /// Dense Cholesky for small grids, preconditioned CG otherwise.
    #[default]
    Auto,
    Dense,
    ConjugateGradient,
}

/// Grids up to this many samples use the dense factorization under `Auto`.
const DENSE_LIMIT: usize = 256;
const CG_TOL: f64 = 1e-14;

/// The first-order conditions `(W + N·D) f = N·D·a` over grid samples.
///
/// `W` is the Fourier multiplier `1 + λ·M` with `M` the diagonal penalty,
/// and `D` holds the per-cell counts on the data cells `X`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    grid: GridSpec,
    penalty: Vec<f64>,
    multiplier: Vec<f64>,
    lambda: f64,
    cells: Vec<usize>,
    counts: Vec<f64>,
    targets: Vec<f64>,
}

impl LinearSystem {
    pub fn assemble(data: &GriddedData, fw: &FrequencyWeight) -> Self {
        let grid = data.grid().clone();
        let penalty = penalty_table(&grid, fw.k, fw.scale);
        let multiplier = penalty.iter().map(|p| 1.0 + fw.lambda * p).collect();
        let mut cells = Vec::with_capacity(data.len());
        let mut counts = Vec::with_capacity(data.len());
        let mut targets = Vec::with_capacity(data.len());
        for (i, d) in data.entries() {
            cells.push(i);
            counts.push(d.count as f64);
            targets.push(d.value);
        }
        Self {
            grid,
            penalty,
            multiplier,
            lambda: fw.lambda,
            cells,
            counts,
            targets,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Diagonal penalty `Σ_i (s·l_i)^{2k}` per frequency.
    pub fn penalty(&self) -> &[f64] {
        &self.penalty
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Flat indices of the data cells.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(W + N·D) x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let total = self.grid.total() as f64;
        let mut y = fft::apply_multiplier(&self.grid, x, &self.multiplier);
        for (&c, &n) in self.cells.iter().zip(&self.counts) {
            y[c] += total * n * x[c];
        }
        y
    }

    fn rhs(&self) -> Vec<f64> {
        let total = self.grid.total() as f64;
        let mut b = vec![0.0; self.grid.total()];
        for ((&c, &n), &a) in self.cells.iter().zip(&self.counts).zip(&self.targets) {
            b[c] = total * n * a;
        }
        b
    }

    /// Solves for the samples; returns them with the iteration count and
    /// whether the solve met its tolerance.
    pub fn solve(&self, method: LinearMethod) -> Result<(Vec<f64>, usize, bool)> {
        let method = match method {
            LinearMethod::Auto if self.grid.total() <= DENSE_LIMIT => LinearMethod::Dense,
            LinearMethod::Auto => LinearMethod::ConjugateGradient,
            m => m,
        };
        if self.cells.is_empty() {
            return Ok((vec![0.0; self.grid.total()], 0, true));
        }
        match method {
            LinearMethod::Dense => self.solve_dense().map(|x| (x, 1, true)),
            _ => Ok(self.solve_cg()),
        }
    }

    fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.total();
        let kernel_coeffs: Vec<Complex64> = self.multiplier.iter().map(|&w| Complex64::new(w, 0.0)).collect();
        let kappa: Vec<f64> = fft::inverse_real(&self.grid, &kernel_coeffs)
            .into_iter()
            .map(|v| v / n as f64)
            .collect();
        let multi: Vec<Vec<usize>> = (0..n).map(|i| self.grid.multi_index(i)).collect();
        let samples = self.grid.samples();
        let mut diff = vec![0usize; samples.len()];
        let mut mat = DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                for (axis, d) in diff.iter_mut().enumerate() {
                    let s = samples[axis];
                    *d = (multi[x][axis] + s - multi[y][axis]) % s;
                }
                mat[(x, y)] = kappa[self.grid.flat_index(&diff)];
            }
        }
        for (&c, &count) in self.cells.iter().zip(&self.counts) {
            mat[(c, c)] += n as f64 * count;
        }
        mat
    }

    fn solve_dense(&self) -> Result<Vec<f64>> {
        let mat = self.dense_matrix();
        let chol = mat
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("system matrix is not positive definite".into()))?;
        let x = chol.solve(&DVector::from_vec(self.rhs()));
        Ok(x.iter().copied().collect())
    }

    /// Conjugate gradients preconditioned by `W^{-1}`; the preconditioned
    /// operator is the identity plus a rank-`|X|` term.
    fn solve_cg(&self) -> (Vec<f64>, usize, bool) {
        let n = self.grid.total();
        let inv: Vec<f64> = self.multiplier.iter().map(|w| 1.0 / w).collect();
        let b = self.rhs();
        let b_norm = dot(&b, &b).sqrt();
        let mut x = fft::apply_multiplier(&self.grid, &b, &inv);
        let ax = self.apply(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut z = fft::apply_multiplier(&self.grid, &r, &inv);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let max_iters = n + 10;
        for it in 0..max_iters {
            if dot(&r, &r).sqrt() <= CG_TOL * b_norm {
                return (x, it, true);
            }
            let ap = self.apply(&p);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = fft::apply_multiplier(&self.grid, &r, &inv);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let ok = dot(&r, &r).sqrt() <= 1e3 * CG_TOL * b_norm;
        if !ok {
            log::warn!("conjugate gradients stopped after {max_iters} iterations");
        }
        (x, max_iters, ok)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer from the normal equations, choosing the method automatically.
pub fn solve_linear(data: &GriddedData, fw: &FrequencyWeight) -> Result<(SpectralField, FitReport)> {
    solve_linear_with(data, fw, LinearMethod::Auto)
}

pub fn solve_linear_with(
    data: &GriddedData,
    fw: &FrequencyWeight,
    method: LinearMethod,
) -> Result<(SpectralField, FitReport)> {
    fw.warn_if_subcritical(data.grid().dim());
    let system = LinearSystem::assemble(data, fw);
    let (values, iterations, converged) = system.solve(method)?;
    let field = SpectralField::from_values(data.grid().clone(), values)?;
    let mut report =
        FitReport::for_grid_field(SolverKind::Linear, &field, data, fw, iterations, Vec::new(), converged)?;
    report.objective_trace.push(report.final_objective);
    Ok((field, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{bin_to_grid, Dataset};
    use crate::solvers::{solve_gd, GDParams};
    use crate::weight::ScaleMode;

    fn sample() -> GriddedData {
        let d = Dataset::new(1, vec![vec![0.25], vec![0.5], vec![0.8125]], vec![1.0, -0.5, 0.3]).unwrap();
        bin_to_grid(&d, &GridSpec::uniform(1, 16).unwrap()).unwrap()
    }

    #[test]
    fn dense_and_cg_agree() {
        let data = sample();
        let fw = FrequencyWeight::new(2, 1e-3, ScaleMode::TwoPi).unwrap();
        let (a, _) = solve_linear_with(&data, &fw, LinearMethod::Dense).unwrap();
        let (b, rb) = solve_linear_with(&data, &fw, LinearMethod::ConjugateGradient).unwrap();
        assert!(rb.converged);
        assert!(rb.iterations <= data.len() + 2);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn satisfies_normal_equations() {
        let data = sample();
        let fw = FrequencyWeight::new(1, 0.1, ScaleMode::TwoPi).unwrap();
        let sys = LinearSystem::assemble(&data, &fw);
        let (x, _, _) = sys.solve(LinearMethod::Dense).unwrap();
        let lhs = sys.apply(&x);
        let rhs = sys.rhs();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-10 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn matches_gradient_descent() {
        let data = sample();
        let fw = FrequencyWeight::new(1, 0.05, ScaleMode::TwoPi).unwrap();
        let (a, _) = solve_linear(&data, &fw).unwrap();
        let (b, rep) = solve_gd(&data, &fw, &GDParams::default()).unwrap();
        assert!(rep.converged);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_data_gives_zero() {
        let data = GriddedData::empty(GridSpec::uniform(2, 4).unwrap());
        let fw = FrequencyWeight::new(2, 1.0, ScaleMode::TwoPi).unwrap();
        let (f, rep) = solve_linear(&data, &fw).unwrap();
        assert_eq!(f.max_abs(), 0.0);
        assert_eq!(rep.final_objective, 0.0);
    }
}
