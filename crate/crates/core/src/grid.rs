//! Uniform sampling of the periodic unit cube.
//!
//! Sample `j` along an axis with `n` samples sits at coordinate `j / n`.
//! Flat indices are row-major: the last axis varies fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-axis sample counts of a grid on `(0,1)^m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct GridSpec {
    samples: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    samples: Vec<usize>,
}

impl TryFrom<GridRepr> for GridSpec {
    type Error = Error;

    fn try_from(repr: GridRepr) -> Result<Self> {
        GridSpec::new(repr.samples)
    }
}

impl From<GridSpec> for GridRepr {
    fn from(grid: GridSpec) -> Self {
        GridRepr { samples: grid.samples }
    }
}

impl GridSpec {
    /// Every axis needs an even sample count of at least 2.
    pub fn new(samples: Vec<usize>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if let Some(bad) = samples.iter().find(|&&n| n < 2 || n % 2 != 0) {
            return Err(Error::InvalidGrid(format!(
                "sample count {bad} must be even and at least 2"
            )));
        }
        Ok(Self { samples })
    }

    /// `m` axes with `n` samples each.
    pub fn uniform(m: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; m])
    }

    pub fn dim(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn total(&self) -> usize {
        self.samples.iter().product()
    }

    /// Largest representable |frequency| along any axis.
    pub fn bandwidth(&self) -> usize {
        self.samples.iter().map(|n| n / 2).max().unwrap_or(0)
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        multi
            .iter()
            .zip(&self.samples)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dim()];
        for (slot, &n) in multi.iter_mut().zip(&self.samples).rev() {
            *slot = flat % n;
            flat /= n;
        }
        multi
    }

    /// Signed DFT frequency of index `j` on an axis of length `n`.
    /// The Nyquist index `n/2` maps to `+n/2`.
    pub fn signed_frequency(j: usize, n: usize) -> i64 {
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Signed frequency tuple of a flat index.
    pub fn frequency(&self, flat: usize) -> Vec<i64> {
        self.multi_index(flat)
            .into_iter()
            .zip(&self.samples)
            .map(|(j, &n)| Self::signed_frequency(j, n))
            .collect()
    }

    /// Cube coordinates of a flat index.
    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .into_iter()
            .zip(&self.samples)
            .map(|(j, &n)| j as f64 / n as f64)
            .collect()
    }

    /// Nearest sample per axis, ties toward the lower index, wrapped periodically.
    pub fn nearest_cell(&self, point: &[f64]) -> Vec<usize> {
        point
            .iter()
            .zip(&self.samples)
            .map(|(&x, &n)| {
                let scaled = x * n as f64;
                let j = (scaled - 0.5).ceil() as i64;
                j.rem_euclid(n as i64) as usize
            })
            .collect()
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.samples.clone(),
                right: other.samples.clone(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_empty() {
        assert!(GridSpec::new(vec![]).is_err());
        assert!(GridSpec::new(vec![3]).is_err());
        assert!(GridSpec::new(vec![0]).is_err());
        assert!(GridSpec::new(vec![4, 2]).is_ok());
    }

    #[test]
    fn flat_and_multi_roundtrip() {
        let g = GridSpec::new(vec![4, 6, 2]).unwrap();
        assert_eq!(g.total(), 48);
        for flat in 0..g.total() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.flat_index(&[1, 2, 1]), (6 + 2) * 2 + 1);
    }

    #[test]
    fn signed_frequencies() {
        let f: Vec<i64> = (0..8).map(|j| GridSpec::signed_frequency(j, 8)).collect();
        assert_eq!(f, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn nearest_cell_rounding() {
        let g = GridSpec::uniform(1, 8).unwrap();
        assert_eq!(g.nearest_cell(&[0.5]), vec![4]);
        let g4 = GridSpec::uniform(1, 4).unwrap();
        assert_eq!(g4.nearest_cell(&[0.26]), vec![1]);
        assert_eq!(g4.nearest_cell(&[0.24]), vec![1]);
        // 0.125 * 4 = 0.5 is a tie; lower index wins
        assert_eq!(g4.nearest_cell(&[0.125]), vec![0]);
        // close to 1 wraps to the seam sample
        assert_eq!(g4.nearest_cell(&[0.95]), vec![0]);
    }

    #[test]
    fn serde_validates() {
        let g: GridSpec = serde_json::from_str(r#"{"samples":[4,8]}"#).unwrap();
        assert_eq!(g.samples(), &[4, 8]);
        assert!(serde_json::from_str::<GridSpec>(r#"{"samples":[5]}"#).is_err());
    }
}
