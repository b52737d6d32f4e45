use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FitReport, SolverKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::weight::FrequencyWeight;

/// Largest frequency box the kernel routines will enumerate.
const MAX_BOX: usize = 1 << 26;

/// `max(8, 4·bandwidth)`.
pub fn default_truncation(bandwidth: usize) -> usize {
    (4 * bandwidth).max(8)
}

/// The frequency box `|η_i| ≤ R` with `1/w(η)` and the penalty at each entry.
struct FrequencyBox {
    m: usize,
    radius: usize,
    inv_weight: Vec<f64>,
    penalty: Vec<f64>,
}

impl FrequencyBox {
    fn new(m: usize, fw: &FrequencyWeight, radius: usize) -> Result<Self> {
        if !fw.is_supercritical(m) {
            return Err(Error::DivergentSeries { k: fw.k, m });
        }
        let side = 2 * radius + 1;
        let len = side
            .checked_pow(m as u32)
            .filter(|&l| l <= MAX_BOX)
            .ok_or_else(|| Error::InvalidParameter(format!("truncation {radius} too large in {m} dimensions")))?;
        let axis: Vec<f64> = (0..side)
            .map(|t| fw.penalty(&[t as i64 - radius as i64]))
            .collect();
        let mut penalty = vec![0.0; len];
        for (b, p) in penalty.iter_mut().enumerate() {
            let mut rest = b;
            for _ in 0..m {
                *p += axis[rest % side];
                rest /= side;
            }
        }
        let inv_weight = penalty.iter().map(|p| 1.0 / (1.0 + fw.lambda * p)).collect();
        Ok(Self {
            m,
            radius,
            inv_weight,
            penalty,
        })
    }

    fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Per-axis tables `e^{±2πi η x_i}` for `η = −R..R`.
    fn phase_tables(&self, x: &[f64], sign: f64) -> Vec<Vec<Complex64>> {
        x.iter()
            .map(|&xi| {
                (0..self.side())
                    .map(|t| Complex64::cis(sign * 2.0 * PI * (t as f64 - self.radius as f64) * xi))
                    .collect()
            })
            .collect()
    }

    /// Calls `visit(b, Π_i table_i[η_i])` for every box entry; the flat
    /// index `b` puts the first axis fastest.
    fn walk(&self, tables: &[Vec<Complex64>], visit: &mut impl FnMut(usize, Complex64)) {
        fn rec(
            tables: &[Vec<Complex64>],
            axis: usize,
            stride: usize,
            side: usize,
            offset: usize,
            acc: Complex64,
            visit: &mut impl FnMut(usize, Complex64),
        ) {
            if axis == tables.len() {
                visit(offset, acc);
                return;
            }
            for (t, z) in tables[axis].iter().enumerate() {
                rec(tables, axis + 1, stride * side, side, offset + t * stride, acc * z, visit);
            }
        }
        rec(tables, 0, 1, self.side(), 0, Complex64::new(1.0, 0.0), visit);
    }

    fn eta(&self, b: usize) -> Vec<i64> {
        let side = self.side();
        let mut rest = b;
        (0..self.m)
            .map(|_| {
                let t = rest % side;
                rest /= side;
                t as i64 - self.radius as i64
            })
            .collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let tables = self.phase_tables(x, 1.0);
        let mut sum = 0.0;
        self.walk(&tables, &mut |b, z| sum += z.re * self.inv_weight[b]);
        sum
    }
}

/// Upper bound on `sup |g − g_R|`, the neglected frequencies outside the box.
///
/// Uses `Σ_i (sη_i)^{2k} ≥ (s·max_i|η_i|)^{2k}` and at most `2m(3t)^{m−1}`
/// lattice points with `max_i|η_i| = t`.
fn tail_bound(fw: &FrequencyWeight, m: usize, radius: usize) -> f64 {
    if radius == 0 {
        return f64::INFINITY;
    }
    let two_k = 2.0 * fw.k as f64;
    let m_f = m as f64;
    2.0 * m_f * 3f64.powi(m as i32 - 1) * (radius as f64).powf(m_f - two_k)
        / ((two_k - m_f) * fw.lambda * fw.scale.factor().powf(two_k))
}

/// The truncated kernel `g(x) = Σ_{|η_i| ≤ R} cos(2π η·x) / w(η)`.
pub fn kernel_value(x: &[f64], fw: &FrequencyWeight, radius: usize) -> Result<f64> {
    Ok(FrequencyBox::new(x.len(), fw, radius)?.value(x))
}

/// `f(x) = Σ_i c_i g(x − p_i)` with `(G + I) c = a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub weight: FrequencyWeight,
    pub truncation: usize,
    pub centers: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub targets: Vec<f64>,
    pub gram: Vec<Vec<f64>>,
    pub tail_bound: f64,
}

/// Builds the Gram matrix `G_ij = g(p_i − p_j)` and solves for the weights.
pub fn solve_kernel(data: &Dataset, fw: &FrequencyWeight, radius: usize) -> Result<KernelModel> {
    let m = data.dim();
    let fbox = FrequencyBox::new(m, fw, radius)?;
    let pts = data.points();
    let n = pts.len();
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let d: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| a - b).collect();
            let g = fbox.value(&d);
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }
    let coefficients = if n == 0 {
        Vec::new()
    } else {
        let mat = DMatrix::from_fn(n, n, |i, j| gram[i][j] + if i == j { 1.0 } else { 0.0 });
        let rhs = DVector::from_column_slice(data.values());
        let chol = mat
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("kernel system is not positive definite".into()))?;
        let mut c = chol.solve(&rhs);
        let r = &rhs - &mat * &c;
        c += chol.solve(&r);
        c.iter().copied().collect()
    };
    Ok(KernelModel {
        weight: *fw,
        truncation: radius,
        centers: pts.to_vec(),
        coefficients,
        targets: data.values().to_vec(),
        gram,
        tail_bound: tail_bound(fw, m, radius),
    })
}

/// Evaluates `model` at `x`.
pub fn kernel_predict(model: &KernelModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

impl KernelModel {
    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    fn frequency_box(&self, m: usize) -> Result<FrequencyBox> {
        FrequencyBox::new(m, &self.weight, self.truncation)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if self.centers.is_empty() {
            return Ok(0.0);
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let fbox = self.frequency_box(x.len())?;
        Ok(self
            .centers
            .iter()
            .zip(&self.coefficients)
            .map(|(p, c)| {
                let d: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
                c * fbox.value(&d)
            })
            .sum())
    }

    /// `S_η = Σ_i c_i e^{−2πi η·p_i}` over the box; `f̂_η = S_η / w(η)`.
    fn spectrum(&self, fbox: &FrequencyBox) -> Vec<Complex64> {
        let mut s = vec![Complex64::default(); fbox.inv_weight.len()];
        for (p, &c) in self.centers.iter().zip(&self.coefficients) {
            let tables = fbox.phase_tables(p, -1.0);
            fbox.walk(&tables, &mut |b, z| s[b] += z * c);
        }
        s
    }

    /// Samples the model on `grid` with one inverse FFT, folding each box
    /// frequency onto its alias.
    pub fn predict_grid(&self, grid: &GridSpec) -> Result<SpectralField> {
        if self.centers.is_empty() {
            return Ok(SpectralField::zeros(grid.clone()));
        }
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: grid.dim(),
            });
        }
        let fbox = self.frequency_box(grid.dim())?;
        let spectrum = self.spectrum(&fbox);
        let mut folded = vec![Complex64::default(); grid.total()];
        let samples = grid.samples();
        for (b, s) in spectrum.iter().enumerate() {
            let multi: Vec<usize> = fbox
                .eta(b)
                .iter()
                .zip(samples)
                .map(|(&e, &n)| e.rem_euclid(n as i64) as usize)
                .collect();
            folded[grid.flat_index(&multi)] += s * fbox.inv_weight[b];
        }
        SpectralField::from_values(grid.clone(), fft::inverse_real(grid, &folded))
    }

    /// `‖(G + I) c − a‖ / ‖a‖`.
    pub fn dual_residual(&self) -> f64 {
        let mut num = 0.0;
        for (i, row) in self.gram.iter().enumerate() {
            let gc: f64 = row.iter().zip(&self.coefficients).map(|(g, c)| g * c).sum();
            let r = gc + self.coefficients[i] - self.targets[i];
            num += r * r;
        }
        let den: f64 = self.targets.iter().map(|a| a * a).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Continuum objective, norms and residuals of the truncated expansion.
    pub fn report(&self) -> Result<FitReport> {
        let (mut l2, mut kgrad, mut bulk) = (0.0, 0.0, 0.0);
        if !self.centers.is_empty() {
            let fbox = self.frequency_box(self.dim())?;
            for (b, s) in self.spectrum(&fbox).iter().enumerate() {
                let iw = fbox.inv_weight[b];
                let e = s.norm_sqr();
                bulk += e * iw;
                l2 += e * iw * iw;
                kgrad += fbox.penalty[b] * e * iw * iw;
            }
        }
        // f(p_i) − a_i = (G c − a)_i = −c_i.
        let data_residuals: Vec<f64> = self.coefficients.iter().map(|c| -c).collect();
        let point: f64 = data_residuals.iter().map(|r| r * r).sum();
        Ok(FitReport {
            solver: SolverKind::Kernel,
            lambda: self.weight.lambda,
            k: self.weight.k,
            scale: self.weight.scale,
            iterations: 1,
            final_objective: bulk + point,
            objective_trace: vec![bulk + point],
            data_residuals,
            l2_norm: l2.sqrt(),
            kgrad_norm: kgrad.sqrt(),
            converged: true,
            gradient_norm: None,
            learning_rate: None,
            truncation: Some(self.truncation),
            tail_bound: Some(self.tail_bound),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
