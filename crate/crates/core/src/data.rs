//! Scattered data: ingestion, zero-mean normalization, grid binning and
//! even symmetric extension.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Points strictly inside `(0,1)^m` with zero-mean values.
///
/// `mean_offset` is the mean that was subtracted from the raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    m: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    mean_offset: f64,
}

impl Dataset {
    /// Validates the points and subtracts the mean of `values`.
    pub fn new(m: usize, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: values.len(),
            });
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: p.len(),
                });
            }
            if !p.iter().all(|&x| x > 0.0 && x < 1.0) {
                return Err(Error::OutsideDomain {
                    index,
                    point: p.clone(),
                });
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("data values must be finite".into()));
        }
        let mean_offset = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        let values = values.into_iter().map(|v| v - mean_offset).collect();
        Ok(Self {
            m,
            points,
            values,
            mean_offset,
        })
    }

    /// Maps raw coordinates affinely from per-axis `bounds` into the unit
    /// cube before validating.
    pub fn from_raw(
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        bounds: &[(f64, f64)],
    ) -> Result<Self> {
        validate_bounds(bounds)?;
        let mapped = points
            .into_iter()
            .map(|p| {
                p.iter()
                    .zip(bounds)
                    .map(|(&x, &(lo, hi))| (x - lo) / (hi - lo))
                    .collect()
            })
            .collect();
        Self::new(bounds.len(), mapped, values)
    }

    pub fn empty(m: usize) -> Self {
        Self {
            m,
            points: Vec::new(),
            values: Vec::new(),
            mean_offset: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean_offset(&self) -> f64 {
        self.mean_offset
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Reads `x1,...,xm,a` rows.
    pub fn load_csv<R: Read>(source: R) -> Result<Self> {
        Self::load_csv_with_bounds(source, None)
    }

    pub fn load_csv_path(path: impl AsRef<Path>, bounds: Option<&[(f64, f64)]>) -> Result<Self> {
        Self::load_csv_with_bounds(File::open(path)?, bounds)
    }

    /// Like [`Dataset::load_csv`]; with `bounds`, raw coordinates are mapped
    /// into the unit cube first.
    pub fn load_csv_with_bounds<R: Read>(source: R, bounds: Option<&[(f64, f64)]>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let header = reader.headers()?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::NoDataRows);
        }
        let m = header.len().saturating_sub(1);
        if m == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "header needs at least one coordinate column and a value column".into(),
            });
        }
        for (i, name) in header.iter().enumerate() {
            let expected = if i < m { format!("x{}", i + 1) } else { "a".to_string() };
            if name != expected {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("column {} should be named {expected:?}, found {name:?}", i + 1),
                });
            }
        }
        if let Some(b) = bounds {
            if b.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: b.len(),
                });
            }
        }

        let mut points = Vec::new();
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if record.len() != m + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", m + 1, record.len()),
                });
            }
            let mut nums = Vec::with_capacity(m + 1);
            for field in record.iter() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("non-numeric field {field:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite field {field:?}"),
                    });
                }
                nums.push(v);
            }
            values.push(nums.pop().unwrap_or_default());
            points.push(nums);
        }
        if points.is_empty() {
            return Err(Error::NoDataRows);
        }
        match bounds {
            Some(b) => Self::from_raw(points, values, b),
            None => Self::new(m, points, values),
        }
    }

    /// Writes `x1,...,xm,a` rows with the mean offset added back, so that
    /// loading the output reproduces this dataset.
    pub fn save_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        let mut header: Vec<String> = (1..=self.m).map(|i| format!("x{i}")).collect();
        header.push("a".into());
        writer.write_record(&header)?;
        for (p, v) in self.points.iter().zip(&self.values) {
            let mut row: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
            row.push(format!("{:?}", v + self.mean_offset));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Dataset = serde_json::from_str(text)?;
        let mut d = Self::new(raw.m, raw.points, raw.values)?;
        d.mean_offset += raw.mean_offset;
        Ok(d)
    }
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidParameter("bounds need at least one axis".into()));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "axis bounds ({lo}, {hi}) must be finite with min < max"
            )));
        }
    }
    Ok(())
}

/// Averaged value and number of points that fell into one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDatum {
    pub value: f64,
    pub count: usize,
}

/// Data binned onto a grid, keyed by flat cell index.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedData {
    grid: GridSpec,
    entries: BTreeMap<usize, CellDatum>,
}

impl GriddedData {
    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        grid: GridSpec,
        entries: impl IntoIterator<Item = (usize, CellDatum)>,
    ) -> Result<Self> {
        let total = grid.total();
        let mut map = BTreeMap::new();
        for (index, datum) in entries {
            if index >= total {
                return Err(Error::InvalidParameter(format!(
                    "cell index {index} outside grid of {total} samples"
                )));
            }
            if datum.count == 0 || !datum.value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "cell {index} needs a positive count and a finite value"
                )));
            }
            map.insert(index, datum);
        }
        Ok(Self { grid, entries: map })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cells in ascending flat-index order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, CellDatum)> + '_ {
        self.entries.iter().map(|(&i, &d)| (i, d))
    }

    pub fn get(&self, index: usize) -> Option<CellDatum> {
        self.entries.get(&index).copied()
    }

    /// `Σ value·count`, zero for binned zero-mean data.
    pub fn weighted_sum(&self) -> f64 {
        self.entries.values().map(|d| d.value * d.count as f64).sum()
    }

    pub fn total_count(&self) -> usize {
        self.entries.values().map(|d| d.count).sum()
    }

    pub fn max_abs_value(&self) -> f64 {
        self.entries.values().fold(0.0, |m, d| m.max(d.value.abs()))
    }

    pub fn max_count(&self) -> usize {
        self.entries.values().map(|d| d.count).max().unwrap_or(0)
    }

    /// Dense per-sample weights (counts) and count-weighted targets.
    pub(crate) fn dense_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.total();
        let mut weights = vec![0.0; n];
        let mut targets = vec![0.0; n];
        for (&i, d) in &self.entries {
            weights[i] = d.count as f64;
            targets[i] = d.value;
        }
        (weights, targets)
    }
}

/// Maps each point to its nearest grid sample; values landing in the same
/// cell are averaged and counted.
pub fn bin_to_grid(data: &Dataset, grid: &GridSpec) -> Result<GriddedData> {
    if data.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: data.dim(),
        });
    }
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (p, &v) in data.points().iter().zip(data.values()) {
        let cell = grid.flat_index(&grid.nearest_cell(p));
        let slot = sums.entry(cell).or_insert((0.0, 0));
        slot.0 += v;
        slot.1 += 1;
    }
    let entries = sums
        .into_iter()
        .map(|(i, (sum, count))| {
            (
                i,
                CellDatum {
                    value: sum / count as f64,
                    count,
                },
            )
        })
        .collect();
    Ok(GriddedData {
        grid: grid.clone(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionMode {
    #[default]
    None,
    EvenSymmetric,
}

/// How non-periodic data is made periodic.
///
/// Under even-symmetric extension, the original unit cube becomes the
/// half-cube `[0, 1/2]^m` of a doubled domain and every point is reflected
/// across each mid-plane `x_i = 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSpec {
    pub mode: ExtensionMode,
    pub original_bounds: Vec<(f64, f64)>,
    /// Per-axis inward nudge for images that round onto the cube boundary.
    pub boundary_inset: Vec<f64>,
}

impl ExtensionSpec {
    /// The inset is half a sample step of `grid`, the grid the extended data
    /// will be fitted on.
    pub fn new(mode: ExtensionMode, original_bounds: Vec<(f64, f64)>, grid: &GridSpec) -> Result<Self> {
        validate_bounds(&original_bounds)?;
        if original_bounds.len() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: original_bounds.len(),
            });
        }
        let boundary_inset = grid.samples().iter().map(|&n| 0.5 / n as f64).collect();
        Ok(Self {
            mode,
            original_bounds,
            boundary_inset,
        })
    }

    /// Unit-cube bounds on every axis of `grid`.
    pub fn unit(mode: ExtensionMode, grid: &GridSpec) -> Self {
        Self::new(mode, vec![(0.0, 1.0); grid.dim()], grid).expect("unit bounds are valid")
    }

    /// Maps a coordinate of the extended cube back to original coordinates.
    /// Both mirror images of a point map to the same original location.
    pub fn to_original(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.original_bounds)
            .map(|(&xi, &(lo, hi))| {
                let u = match self.mode {
                    ExtensionMode::None => xi,
                    ExtensionMode::EvenSymmetric => {
                        let folded = xi.rem_euclid(1.0);
                        2.0 * folded.min(1.0 - folded)
                    }
                };
                lo + u * (hi - lo)
            })
            .collect()
    }
}

/// Reflects every point into its `2^m` mirror images in the doubled domain,
/// each carrying the original value.
pub fn even_extension(data: &Dataset, spec: &ExtensionSpec) -> Result<Dataset> {
    if spec.mode == ExtensionMode::None {
        return Ok(data.clone());
    }
    let m = data.dim();
    if spec.boundary_inset.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: spec.boundary_inset.len(),
        });
    }
    let images = 1usize << m;
    let mut points = Vec::with_capacity(data.len() * images);
    let mut values = Vec::with_capacity(data.len() * images);
    for (p, &v) in data.points().iter().zip(data.values()) {
        for mask in 0..images {
            let image: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(axis, &x)| {
                    let y = if mask >> axis & 1 == 0 { x / 2.0 } else { 1.0 - x / 2.0 };
                    nudge_inside(y, spec.boundary_inset[axis])
                })
                .collect();
            points.push(image);
            values.push(v);
        }
    }
    let mut out = Dataset::new(m, points, values)?;
    out.mean_offset = data.mean_offset;
    Ok(out)
}

fn nudge_inside(y: f64, inset: f64) -> f64 {
    if y <= 0.0 {
        log::warn!("reflected coordinate {y} on the boundary; moved inward by {inset}");
        inset
    } else if y >= 1.0 {
        log::warn!("reflected coordinate {y} on the boundary; moved inward by {inset}");
        1.0 - inset
    } else {
        y
    }
}
