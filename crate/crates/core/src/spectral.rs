//! Norms, the fitting objective, its gradient and the weak-form residual.
//!
//! All integrals over the cube are Riemann sums on the grid, which under the
//! normalized DFT are exact Parseval sums over the coefficients:
//!
//! ```text
//! C(f) = Σ_l w(l) |c_l|² + Σ_cells count·(f(cell) − a)²
//! w(l) = 1 + λ Σ_i (s·l_i)^{2k}
//! ```

use crate::data::GriddedData;
use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::weight::{penalty_table, FrequencyWeight, ScaleMode};

/// `‖f‖²_{L²}` from the coefficients.
pub fn l2_norm_sq(f: &SpectralField) -> f64 {
    f.coeffs().iter().map(|c| c.norm_sqr()).sum()
}

/// `‖f‖²_{L²}` as the mean square of the samples.
pub fn l2_norm_sq_space(f: &SpectralField) -> f64 {
    let v = f.values();
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// `‖∇^k f‖²_{L²}`, the pure k-th derivative energy, without the λ factor.
pub fn kgrad_norm_sq(f: &SpectralField, fw: &FrequencyWeight) -> f64 {
    let penalty = penalty_table(f.grid(), fw.k, fw.scale);
    f.coeffs()
        .iter()
        .zip(&penalty)
        .map(|(c, p)| p * c.norm_sqr())
        .sum()
}

/// Full Sobolev norm `‖f‖²_{L²} + Σ_{|α|=k} ‖D^α f‖²`, mixed derivatives
/// included, each multi-index counted once.
pub fn sobolev_norm_sq(f: &SpectralField, k: u32, scale: ScaleMode) -> f64 {
    let s = scale.factor();
    let grid = f.grid();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let squares: Vec<f64> = grid.frequency(i).iter().map(|&l| (s * l as f64).powi(2)).collect();
            (1.0 + complete_homogeneous(&squares, k as usize)) * c.norm_sqr()
        })
        .sum()
}

/// `Σ_l (1 + |l|²)^k |c_l|²`, the Bessel-potential form of the `H^k` norm.
pub fn bracket_norm_sq(f: &SpectralField, k: u32) -> f64 {
    let grid = f.grid();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let l2: f64 = grid.frequency(i).iter().map(|&l| (l * l) as f64).sum();
            (1.0 + l2).powi(k as i32) * c.norm_sqr()
        })
        .sum()
}

/// Sum over all monomials of degree `k` in `xs`.
fn complete_homogeneous(xs: &[f64], k: usize) -> f64 {
    let mut h = vec![0.0; k + 1];
    h[0] = 1.0;
    for &x in xs {
        for j in 1..=k {
            h[j] += x * h[j - 1];
        }
    }
    h[k]
}

fn data_term(f: &SpectralField, data: &GriddedData) -> f64 {
    data.entries()
        .map(|(i, d)| {
            let r = f.value_at(i) - d.value;
            d.count as f64 * r * r
        })
        .sum()
}

/// `C(f) = ‖f‖²_{L²} + λ‖∇^k f‖²_{L²} + Σ (f(p_i) − a_i)²`.
pub fn objective(f: &SpectralField, data: &GriddedData, fw: &FrequencyWeight) -> Result<f64> {
    f.grid().ensure_same(data.grid())?;
    Ok(l2_norm_sq(f) + fw.lambda * kgrad_norm_sq(f, fw) + data_term(f, data))
}

/// Gradient of [`objective`] with respect to the grid samples of `f`.
pub fn objective_gradient(
    f: &SpectralField,
    data: &GriddedData,
    fw: &FrequencyWeight,
) -> Result<SpectralField> {
    f.grid().ensure_same(data.grid())?;
    let q = Quadratic::new(data, fw);
    SpectralField::from_values(f.grid().clone(), q.gradient(f.values()))
}

/// Left-hand side of the weak Euler-Lagrange equation tested against `phi`:
///
/// `λ∫∇^kφ·∇^kf + ∫φf + Σ (f(p_i) − a_i) φ(p_i)`.
///
/// Vanishes for every `phi` exactly when `f` minimizes [`objective`].
pub fn el_residual(
    f: &SpectralField,
    data: &GriddedData,
    fw: &FrequencyWeight,
    phi: &SpectralField,
) -> Result<f64> {
    f.grid().ensure_same(data.grid())?;
    f.grid().ensure_same(phi.grid())?;
    let penalty = penalty_table(f.grid(), fw.k, fw.scale);
    let bulk: f64 = f
        .coeffs()
        .iter()
        .zip(phi.coeffs())
        .zip(&penalty)
        .map(|((cf, cp), p)| (1.0 + fw.lambda * p) * (cp.conj() * cf).re)
        .sum();
    let point: f64 = data
        .entries()
        .map(|(i, d)| d.count as f64 * (f.value_at(i) - d.value) * phi.value_at(i))
        .sum();
    Ok(bulk + point)
}

/// Truncated embedding constant `K̂(R) = sqrt(Σ_{|l_i| ≤ R} (1 + |l|²)^{−k})`.
///
/// Bounds `max|u| ≤ K̂(R)·‖u‖_{H^k}` for fields band-limited to the same box.
pub fn sup_norm_bound_constant(k: u32, m: usize, radius: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if 2 * k as usize <= m {
        return Err(Error::DivergentSeries { k, m });
    }
    // Sum over |l|² with multiplicities, built axis by axis.
    let r = radius as i64;
    let mut counts: Vec<f64> = vec![1.0];
    for _ in 0..m {
        let mut next = vec![0.0; counts.len() + (r * r) as usize];
        for (s, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for l in -r..=r {
                next[s + (l * l) as usize] += c;
            }
        }
        counts = next;
    }
    let sum: f64 = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .map(|(s, &c)| c * (1.0 + s as f64).powi(-(k as i32)))
        .sum();
    Ok(sum.sqrt())
}

/// The discrete objective as a quadratic form over grid samples.
///
/// Gradient: `(2/N)·W f + 2·n ⊙ (f − a)`, where `W` applies the multiplier.
pub(crate) struct Quadratic {
    pub grid: GridSpec,
    pub multiplier: Vec<f64>,
    pub counts: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Quadratic {
    pub fn new(data: &GriddedData, fw: &FrequencyWeight) -> Self {
        let grid = data.grid().clone();
        let (counts, targets) = data.dense_weights();
        Self {
            multiplier: fw.multiplier(&grid),
            grid,
            counts,
            targets,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.len()
    }

    pub fn gradient(&self, values: &[f64]) -> Vec<f64> {
        let scale = 2.0 / self.total() as f64;
        let wf = fft::apply_multiplier(&self.grid, values, &self.multiplier);
        wf.iter()
            .zip(values)
            .zip(self.counts.iter().zip(&self.targets))
            .map(|((w, f), (n, a))| scale * w + 2.0 * n * (f - a))
            .collect()
    }

    /// Objective and gradient sharing one forward transform.
    pub fn evaluate(&self, values: &[f64]) -> (f64, Vec<f64>) {
        let mut coeffs = fft::forward_real(&self.grid, values);
        let mut bulk = 0.0;
        for (c, w) in coeffs.iter_mut().zip(&self.multiplier) {
            bulk += w * c.norm_sqr();
            *c *= *w;
        }
        let wf = fft::inverse_real(&self.grid, &coeffs);
        let scale = 2.0 / self.total() as f64;
        let mut point = 0.0;
        let grad = wf
            .iter()
            .zip(values)
            .zip(self.counts.iter().zip(&self.targets))
            .map(|((w, f), (n, a))| {
                let r = f - a;
                point += n * r * r;
                scale * w + 2.0 * n * r
            })
            .collect();
        (bulk + point, grad)
    }

    /// Upper bound on the Hessian spectrum: `2·(max w / N + max count)`.
    pub fn lipschitz(&self) -> f64 {
        let wmax = self.multiplier.iter().cloned().fold(0.0, f64::max);
        let nmax = self.counts.iter().cloned().fold(0.0, f64::max);
        2.0 * (wmax / self.total() as f64 + nmax)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CellDatum;
    use std::f64::consts::PI;

    fn cos1(n: usize) -> SpectralField {
        SpectralField::from_fn(GridSpec::uniform(1, n).unwrap(), |x| (2.0 * PI * x[0]).cos()).unwrap()
    }

    fn fw(k: u32, lambda: f64) -> FrequencyWeight {
        FrequencyWeight::new(k, lambda, ScaleMode::TwoPi).unwrap()
    }

    #[test]
    fn l2_examples() {
        let g = GridSpec::uniform(2, 4).unwrap();
        assert_eq!(l2_norm_sq(&SpectralField::zeros(g.clone())), 0.0);
        let c = SpectralField::from_fn(g, |_| -1.5).unwrap();
        assert!((l2_norm_sq(&c) - 2.25).abs() < 1e-14);
        assert!((l2_norm_sq(&cos1(16)) - 0.5).abs() < 1e-14);
        assert!((l2_norm_sq_space(&cos1(16)) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn kgrad_examples() {
        let g = GridSpec::uniform(1, 8).unwrap();
        let c = SpectralField::from_fn(g, |_| 3.0).unwrap();
        assert!(kgrad_norm_sq(&c, &fw(1, 1.0)).abs() < 1e-20);
        let f = cos1(16);
        let k1 = kgrad_norm_sq(&f, &fw(1, 0.7));
        assert!((k1 - (2.0 * PI).powi(2) / 2.0).abs() < 1e-12);
        assert!((k1 - 19.739208802178716).abs() < 1e-9);
        let k2 = kgrad_norm_sq(&f, &fw(2, 0.7));
        assert!((k2 - (2.0 * PI).powi(4) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn objective_trivial_cases() {
        let g = GridSpec::uniform(1, 8).unwrap();
        let zero = SpectralField::zeros(g.clone());
        let data = GriddedData::from_entries(
            g.clone(),
            [(1, CellDatum { value: 1.0, count: 1 }), (5, CellDatum { value: -1.0, count: 1 })],
        )
        .unwrap();
        assert_eq!(objective(&zero, &data, &fw(1, 0.5)).unwrap(), 2.0);
        let empty = GriddedData::empty(g.clone());
        assert_eq!(objective(&zero, &empty, &fw(1, 0.5)).unwrap(), 0.0);
        let other = GriddedData::empty(GridSpec::uniform(1, 4).unwrap());
        assert!(objective(&zero, &other, &fw(1, 0.5)).is_err());
    }

    #[test]
    fn objective_direct_sum_oracle() {
        // Riemann sums of f² and (f^{(k)})² with the closed-form derivative,
        // plus the data term, compared against the spectral evaluation.
        let n = 8;
        let g = GridSpec::uniform(1, n).unwrap();
        let f = cos1(n);
        let data = GriddedData::from_entries(g.clone(), [(3, CellDatum { value: 0.4, count: 1 })]).unwrap();
        let w = fw(1, 0.3);
        let mut l2 = 0.0;
        let mut d1 = 0.0;
        for j in 0..n {
            let x = j as f64 / n as f64;
            l2 += (2.0 * PI * x).cos().powi(2) / n as f64;
            d1 += (2.0 * PI * (2.0 * PI * x).sin()).powi(2) / n as f64;
        }
        let fx = (2.0 * PI * 3.0 / 8.0).cos();
        let expected = l2 + 0.3 * d1 + (fx - 0.4).powi(2);
        let got = objective(&f, &data, &w).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected, "{got} vs {expected}");
    }

    #[test]
    fn gradient_zero_for_empty_zero() {
        let g = GridSpec::uniform(2, 4).unwrap();
        let grad = objective_gradient(&SpectralField::zeros(g.clone()), &GriddedData::empty(g), &fw(1, 1.0)).unwrap();
        assert!(grad.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn el_residual_constant_test_function() {
        let g = GridSpec::uniform(1, 16).unwrap();
        let f = SpectralField::from_fn(g.clone(), |x| (2.0 * PI * x[0]).sin() + 0.3).unwrap();
        let data = GriddedData::from_entries(
            g.clone(),
            [(2, CellDatum { value: 1.0, count: 2 }), (9, CellDatum { value: -2.0, count: 1 })],
        )
        .unwrap();
        let one = SpectralField::from_fn(g, |_| 1.0).unwrap();
        let got = el_residual(&f, &data, &fw(2, 0.4), &one).unwrap();
        let integral: f64 = f.values().iter().sum::<f64>() / 16.0;
        let expected = integral + 2.0 * (f.value_at(2) - 1.0) + (f.value_at(9) + 2.0);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn el_residual_trivial() {
        let g = GridSpec::uniform(1, 8).unwrap();
        let phi = SpectralField::from_fn(g.clone(), |x| (2.0 * PI * x[0]).cos()).unwrap();
        let r = el_residual(&SpectralField::zeros(g.clone()), &GriddedData::empty(g), &fw(1, 1.0), &phi).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn sup_norm_constant_examples() {
        assert_eq!(sup_norm_bound_constant(1, 1, 0).unwrap(), 1.0);
        let direct: f64 = (-100i64..=100).map(|l| 1.0 / (1.0 + (l * l) as f64)).sum();
        assert!((sup_norm_bound_constant(1, 1, 100).unwrap() - direct.sqrt()).abs() < 1e-12);
        let mut direct2 = 0.0;
        for a in -50i64..=50 {
            for b in -50i64..=50 {
                direct2 += (1.0 + (a * a + b * b) as f64).powi(-2);
            }
        }
        assert!((sup_norm_bound_constant(2, 2, 50).unwrap() - direct2.sqrt()).abs() < 1e-12);
        assert!(matches!(sup_norm_bound_constant(1, 2, 10), Err(Error::DivergentSeries { .. })));
    }

    #[test]
    fn sup_norm_constant_monotone() {
        let mut prev = 0.0;
        for r in 0..30 {
            let k = sup_norm_bound_constant(2, 3, r).unwrap();
            assert!(k >= prev);
            prev = k;
        }
    }

    #[test]
    fn complete_homogeneous_small() {
        // h_2(x, y) = x² + xy + y²
        assert_eq!(complete_homogeneous(&[2.0, 3.0], 2), 4.0 + 6.0 + 9.0);
        assert_eq!(complete_homogeneous(&[2.0, 3.0], 0), 1.0);
    }

    #[test]
    fn sobolev_dominates_tk() {
        let g = GridSpec::uniform(2, 8).unwrap();
        let f = SpectralField::from_fn(g, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).sin()).unwrap();
        let w = fw(2, 1.0);
        let tk = l2_norm_sq(&f) + kgrad_norm_sq(&f, &w);
        assert!(sobolev_norm_sq(&f, 2, ScaleMode::TwoPi) >= tk);
    }
}
