//! The Fourier multiplier `1 + λ Σ_i (s·l_i)^{2k}` of the regularized norm.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Frequency scale `s` inside the multiplier.
///
/// `TwoPi` is the derivative multiplier of `e^{2πi l·x}`; `Unit` drops the
/// factor, which is equivalent to rescaling λ by `(2π)^{2k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScaleMode {
    #[default]
    #[serde(rename = "2pi")]
    TwoPi,
    #[serde(rename = "1")]
    Unit,
}

impl ScaleMode {
    pub fn factor(self) -> f64 {
        match self {
            ScaleMode::TwoPi => 2.0 * PI,
            ScaleMode::Unit => 1.0,
        }
    }
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMode::TwoPi => "2pi",
            ScaleMode::Unit => "1",
        })
    }
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2pi" => Ok(ScaleMode::TwoPi),
            "1" => Ok(ScaleMode::Unit),
            other => Err(Error::InvalidParameter(format!(
                "unknown scale mode {other:?} (expected 2pi or 1)"
            ))),
        }
    }
}

/// Smoothness order, regularization weight and multiplier scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyWeight {
    pub k: u32,
    pub lambda: f64,
    #[serde(default)]
    pub scale: ScaleMode,
}

impl FrequencyWeight {
    pub fn new(k: u32, lambda: f64, scale: ScaleMode) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { k, lambda, scale })
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Self::new(self.k, lambda, self.scale)
    }

    /// Penalty `Σ_i (s·l_i)^{2k}` without the λ factor.
    pub fn penalty(&self, l: &[i64]) -> f64 {
        penalty(l, self.k, self.scale)
    }

    /// Whether `k > m/2`, the condition for continuity of the minimizer.
    pub fn is_supercritical(&self, m: usize) -> bool {
        2 * self.k as usize > m
    }

    /// Logs a warning when `k ≤ m/2`; the discrete problem stays well posed.
    pub fn warn_if_subcritical(&self, m: usize) {
        if !self.is_supercritical(m) {
            log::warn!(
                "smoothness order k = {} does not exceed m/2 = {}; continuum minimizer need not be continuous",
                self.k,
                m as f64 / 2.0
            );
        }
    }

    /// The multiplier at every flat index of `grid`.
    pub fn multiplier(&self, grid: &GridSpec) -> Vec<f64> {
        penalty_table(grid, self.k, self.scale)
            .into_iter()
            .map(|p| 1.0 + self.lambda * p)
            .collect()
    }
}

fn penalty(l: &[i64], k: u32, scale: ScaleMode) -> f64 {
    let s = scale.factor();
    l.iter().map(|&li| (s * li as f64).powi(2 * k as i32)).sum()
}

/// `Σ_i (s·l_i)^{2k}` at every flat index of `grid`.
pub fn penalty_table(grid: &GridSpec, k: u32, scale: ScaleMode) -> Vec<f64> {
    // Per-axis powers, then summed over axes.
    let s = scale.factor();
    let axis_powers: Vec<Vec<f64>> = grid
        .samples()
        .iter()
        .map(|&n| {
            (0..n)
                .map(|j| (s * GridSpec::signed_frequency(j, n) as f64).powi(2 * k as i32))
                .collect()
        })
        .collect();
    (0..grid.total())
        .map(|flat| {
            grid.multi_index(flat)
                .iter()
                .zip(&axis_powers)
                .map(|(&j, pw)| pw[j])
                .sum()
        })
        .collect()
}

/// `w(l) = 1 + λ Σ_i (s·l_i)^{2k}`.
pub fn frequency_weight(l: &[i64], fw: &FrequencyWeight) -> f64 {
    1.0 + fw.lambda * fw.penalty(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frequency_is_one() {
        for k in 1..4 {
            let fw = FrequencyWeight::new(k, 3.7, ScaleMode::TwoPi).unwrap();
            assert_eq!(frequency_weight(&[0, 0], &fw), 1.0);
        }
    }

    #[test]
    fn worked_values() {
        let fw = FrequencyWeight::new(1, 1.0, ScaleMode::TwoPi).unwrap();
        let w = frequency_weight(&[1], &fw);
        assert!((w - 40.47841760435743).abs() < 1e-12);

        let fw = FrequencyWeight::new(2, 0.5, ScaleMode::TwoPi).unwrap();
        let expected = 1.0 + 0.5 * ((2.0 * PI).powi(4) + (4.0 * PI).powi(4));
        assert!((frequency_weight(&[1, 2], &fw) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn even_in_each_component() {
        let fw = FrequencyWeight::new(3, 0.2, ScaleMode::Unit).unwrap();
        for l in [[1, -2], [3, 5], [-4, 0]] {
            let w = frequency_weight(&l, &fw);
            assert_eq!(w, frequency_weight(&[-l[0], l[1]], &fw));
            assert_eq!(w, frequency_weight(&[l[0], -l[1]], &fw));
        }
    }

    #[test]
    fn table_matches_pointwise() {
        let g = GridSpec::new(vec![6, 4]).unwrap();
        let fw = FrequencyWeight::new(2, 0.3, ScaleMode::TwoPi).unwrap();
        let table = fw.multiplier(&g);
        for (flat, t) in table.iter().enumerate() {
            let direct = frequency_weight(&g.frequency(flat), &fw);
            assert!((t - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FrequencyWeight::new(0, 1.0, ScaleMode::TwoPi).is_err());
        assert!(FrequencyWeight::new(1, 0.0, ScaleMode::TwoPi).is_err());
        assert!(FrequencyWeight::new(1, f64::NAN, ScaleMode::TwoPi).is_err());
        assert!("3pi".parse::<ScaleMode>().is_err());
        assert_eq!("1".parse::<ScaleMode>().unwrap(), ScaleMode::Unit);
    }
}
