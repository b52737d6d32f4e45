use std::io::{Read, Write};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::GridSpec;

/// A real function on a grid, held as space samples together with its
/// normalized DFT coefficients.
///
/// Coefficients use `c_l = (1/N) Σ_x f(x) e^{-2πi l·x}`, so `Σ_l |c_l|²`
/// equals the mean square of the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct SpectralField {
    grid: GridSpec,
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    grid: GridSpec,
    values: Vec<f64>,
}

impl TryFrom<FieldRepr> for SpectralField {
    type Error = Error;

    fn try_from(repr: FieldRepr) -> Result<Self> {
        SpectralField::from_values(repr.grid, repr.values)
    }
}

impl From<SpectralField> for FieldRepr {
    fn from(field: SpectralField) -> Self {
        FieldRepr {
            grid: field.grid,
            values: field.values,
        }
    }
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.total();
        Self {
            grid,
            values: vec![0.0; n],
            coeffs: vec![Complex64::default(); n],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total() {
            return Err(Error::DimensionMismatch {
                expected: grid.total(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("field samples must be finite".into()));
        }
        let coeffs = fft::forward_real(&grid, &values);
        Ok(Self {
            grid,
            values,
            coeffs,
        })
    }

    /// Samples `f` at every grid coordinate.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.total()).map(|i| f(&grid.coordinates(i))).collect();
        Self::from_values(grid, values)
    }

    /// Builds a field from coefficients; the Hermitian part is kept so the
    /// result is real.
    pub fn from_coeffs(grid: GridSpec, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.total() {
            return Err(Error::DimensionMismatch {
                expected: grid.total(),
                found: coeffs.len(),
            });
        }
        let values = fft::inverse_real(&grid, coeffs);
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value_at(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SpectralField, b: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::from_values(self.grid.clone(), values)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// Largest `|c_l - conj(c_{-l})|`; zero for an exactly real field.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.grid.total())
            .map(|i| (self.coeffs[i] - self.coeffs[negated_index(&self.grid, i)].conj()).norm())
            .fold(0.0, f64::max)
    }
}

impl SpectralField {
    /// Writes `index,x1,...,xm,value`, one row per grid sample.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["index".to_string()];
        header.extend((1..=self.grid.dim()).map(|i| format!("x{i}")));
        header.push("value".into());
        w.write_record(&header)?;
        for (i, v) in self.values.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(self.grid.coordinates(i).iter().map(f64::to_string));
            row.push(v.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the output of [`write_csv`](Self::write_csv) back onto `grid`.
    pub fn read_csv<R: Read>(source: R, grid: GridSpec) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(source);
        let width = grid.dim() + 2;
        let mut values = vec![f64::NAN; grid.total()];
        let mut seen = 0;
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let line = row + 2;
            let parse = |message: &str| Error::Parse {
                line,
                message: message.to_string(),
            };
            if record.len() != width {
                return Err(parse(&format!("expected {width} columns, found {}", record.len())));
            }
            let index: usize = record[0].trim().parse().map_err(|_| parse("bad index"))?;
            if index >= grid.total() {
                return Err(parse("index outside grid"));
            }
            values[index] = record[width - 1].trim().parse().map_err(|_| parse("bad value"))?;
            seen += 1;
        }
        if seen != grid.total() || values.iter().any(|v| v.is_nan()) {
            return Err(Error::DimensionMismatch {
                expected: grid.total(),
                found: seen,
            });
        }
        Self::from_values(grid, values)
    }
}

/// Flat index of the frequency `-l` for the frequency at `flat`.
pub(crate) fn negated_index(grid: &GridSpec, flat: usize) -> usize {
    let multi: Vec<usize> = grid
        .multi_index(flat)
        .into_iter()
        .zip(grid.samples())
        .map(|(j, &n)| (n - j) % n)
        .collect();
    grid.flat_index(&multi)
}
