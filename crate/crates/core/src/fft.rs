//! Multi-dimensional complex DFT over a [`GridSpec`], one axis at a time.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::grid::GridSpec;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(grid: &GridSpec, data: &mut [Complex64], direction: FftDirection) {
    debug_assert_eq!(data.len(), grid.total());
    let samples = grid.samples();
    let total = data.len();
    let mut stride = total;
    let mut line = Vec::new();
    for &n in samples {
        stride /= n;
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
        let block = n * stride;
        line.resize(n, Complex64::default());
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Normalized forward transform: `c_l = (1/N) Σ_x f(x) e^{-2πi l·x}`.
pub fn forward_real(grid: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, FftDirection::Forward);
    let scale = 1.0 / grid.total() as f64;
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// Inverse of [`forward_real`]: `f(x) = Σ_l c_l e^{2πi l·x}`, real part kept.
pub fn inverse_real(grid: &GridSpec, coeffs: &[Complex64]) -> Vec<f64> {
    let mut data = coeffs.to_vec();
    transform(grid, &mut data, FftDirection::Inverse);
    data.into_iter().map(|c| c.re).collect()
}

/// Applies a diagonal Fourier multiplier to a real grid function.
pub fn apply_multiplier(grid: &GridSpec, values: &[f64], multiplier: &[f64]) -> Vec<f64> {
    let mut coeffs = forward_real(grid, values);
    for (c, &w) in coeffs.iter_mut().zip(multiplier) {
        *c *= w;
    }
    inverse_real(grid, &coeffs)
}
