//! Binary classification by fitting ±labels on a PCA-aligned feature grid.
//!
//! Features are centered and scaled into `[−1, 1]`, rotated onto principal
//! axes, and quantized with per-axis counts proportional to the standard
//! deviation along each axis. Labels become `1` (positive) and `0`
//! (negative) before mean removal; a feature vector is classified positive
//! when the fitted field is strictly positive in its cell.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{bin_to_grid, Dataset};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::select::{sweep_lambda, LambdaSweepResult};
use crate::solvers::solve_linear;
use crate::weight::FrequencyWeight;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Eigenvalues of the normalized covariance, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Retained principal directions, one per grid axis.
    pub basis: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub score_min: Vec<f64>,
    pub score_max: Vec<f64>,
}

/// `x` rounded to the nearest even integer, at least 2.
fn even_count(x: f64) -> usize {
    ((2.0 * (x / 2.0).round()) as usize).max(2)
}

fn counts_for(sds: &[f64], scale: f64) -> Vec<usize> {
    sds.iter().map(|s| even_count(scale * s)).collect()
}

fn product(counts: &[usize]) -> f64 {
    counts.iter().map(|&c| c as f64).product()
}

/// Even counts `≈ t·sd_i` with `t` chosen so the product lands closest to
/// `budget` on a log scale.
fn quantization_counts(sds: &[f64], budget: usize) -> Vec<usize> {
    let target = budget as f64;
    let m = sds.len() as f64;
    let geo: f64 = sds.iter().map(|s| s.ln()).sum::<f64>() / m;
    let t0 = (target.ln() / m - geo).exp();
    // Bracket the crossing, then bisect on log t.
    let (mut lo, mut hi) = (t0.ln() - 5.0, t0.ln() + 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if product(&counts_for(sds, mid.exp())) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let below = counts_for(sds, lo.exp());
    let above = counts_for(sds, hi.exp());
    let miss = |c: &[usize]| (product(c).ln() - target.ln()).abs();
    if miss(&above) < miss(&below) {
        above
    } else {
        below
    }
}

/// Normalizes, rotates onto principal axes and picks per-axis grid counts.
pub fn fit_transform(features: &[Vec<f64>], quant_budget: usize) -> Result<FeatureTransform> {
    let n = features.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two examples".into()));
    }
    let d = features[0].len();
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one feature".into()));
    }
    if quant_budget < 2 {
        return Err(Error::InvalidParameter("quantization budget must be at least 2".into()));
    }
    for row in features {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("features must be finite".into()));
        }
    }

    let means: Vec<f64> = (0..d)
        .map(|j| features.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let scales: Vec<f64> = (0..d)
        .map(|j| {
            let s = features.iter().map(|r| (r[j] - means[j]).abs()).fold(0.0, f64::max);
            if s > 0.0 {
                s
            } else {
                log::warn!("feature {j} is constant; leaving it unscaled");
                1.0
            }
        })
        .collect();
    let z = DMatrix::from_fn(n, d, |i, j| (features[i][j] - means[j]) / scales[j]);
    let cov = z.transpose() * &z / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let top = eigenvalues[0];
    if top <= 0.0 {
        return Err(Error::InvalidParameter("all features are constant".into()));
    }

    let mut basis = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if eigenvalues[rank] <= RANK_TOL * top {
            log::warn!("dropping principal axis {rank} with eigenvalue {:e}", eigenvalues[rank]);
            continue;
        }
        let mut col: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // Fix the sign so the largest component is positive.
        let lead = col.iter().cloned().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        basis.push(col);
    }
    let sds: Vec<f64> = eigenvalues[..basis.len()].iter().map(|e| e.sqrt()).collect();
    let counts = quantization_counts(&sds, quant_budget);

    let mut t = FeatureTransform {
        means,
        scales,
        eigenvalues,
        basis,
        counts,
        score_min: Vec::new(),
        score_max: Vec::new(),
    };
    let scores: Vec<Vec<f64>> = features.iter().map(|r| t.scores(r)).collect();
    t.score_min = (0..t.dim()).map(|j| scores.iter().map(|s| s[j]).fold(f64::INFINITY, f64::min)).collect();
    t.score_max = (0..t.dim()).map(|j| scores.iter().map(|s| s[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    Ok(t)
}

impl FeatureTransform {
    /// Number of retained axes.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.counts.clone())
    }

    /// Principal-axis scores of a raw feature vector.
    pub fn scores(&self, feature: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = feature
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        self.basis
            .iter()
            .map(|col| col.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maps a raw feature vector into the cube with a half-cell inset; also
    /// reports whether any coordinate had to be clamped.
    pub fn to_unit(&self, feature: &[f64]) -> Result<(Vec<f64>, bool)> {
        if feature.len() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: feature.len(),
            });
        }
        let mut clamped = false;
        let x = self
            .scores(feature)
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                let span = self.score_max[j] - self.score_min[j];
                let mut u = if span > 0.0 { (s - self.score_min[j]) / span } else { 0.5 };
                if !(0.0..=1.0).contains(&u) {
                    clamped = true;
                    u = u.clamp(0.0, 1.0);
                }
                let n = self.counts[j] as f64;
                (0.5 + u * (n - 1.0)) / n
            })
            .collect();
        Ok((x, clamped))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub transform: FeatureTransform,
    pub grid: GridSpec,
    pub field: SpectralField,
    pub weight: FrequencyWeight,
    pub label_mean_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Positive,
    Negative,
}

fn check_labels(features: &[Vec<f64>], labels: &[bool]) -> Result<()> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            found: labels.len(),
        });
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

fn training_set(transform: &FeatureTransform, features: &[Vec<f64>], labels: &[bool]) -> Result<Dataset> {
    let points = features
        .iter()
        .map(|f| transform.to_unit(f).map(|(x, _)| x))
        .collect::<Result<Vec<_>>>()?;
    let values = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    Dataset::new(transform.dim(), points, values)
}

/// Fits the label field at a fixed λ.
pub fn train(
    features: &[Vec<f64>],
    labels: &[bool],
    fw: &FrequencyWeight,
    quant_budget: usize,
) -> Result<ClassifierModel> {
    check_labels(features, labels)?;
    let transform = fit_transform(features, quant_budget)?;
    let data = training_set(&transform, features, labels)?;
    let grid = transform.grid()?;
    fw.warn_if_subcritical(grid.dim());
    let gridded = bin_to_grid(&data, &grid)?;
    let (field, _) = solve_linear(&gridded, fw)?;
    Ok(ClassifierModel {
        transform,
        grid,
        field,
        weight: *fw,
        label_mean_offset: data.mean_offset(),
    })
}

/// λ grid used when the caller asks for automatic selection: one point per
/// decade over `[1e-8, 1e4]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-8..=4).map(|e| 10f64.powi(e)).collect()
}

/// Fits the label field at the λ maximizing `‖f_λ‖` over `lambdas`.
pub fn train_auto(
    features: &[Vec<f64>],
    labels: &[bool],
    template: &FrequencyWeight,
    quant_budget: usize,
    lambdas: &[f64],
) -> Result<(ClassifierModel, LambdaSweepResult)> {
    check_labels(features, labels)?;
    let transform = fit_transform(features, quant_budget)?;
    let data = training_set(&transform, features, labels)?;
    let grid = transform.grid()?;
    template.warn_if_subcritical(grid.dim());
    let gridded = bin_to_grid(&data, &grid)?;
    let sweep = sweep_lambda(&gridded, template, lambdas)?;
    let model = ClassifierModel {
        transform,
        grid,
        field: sweep.field0.clone(),
        weight: template.with_lambda(sweep.lambda0)?,
        label_mean_offset: data.mean_offset(),
    };
    Ok((model, sweep))
}

impl ClassifierModel {
    /// Flat grid index of the cell a raw feature vector falls into.
    pub fn cell_of(&self, feature: &[f64]) -> Result<usize> {
        let (x, clamped) = self.transform.to_unit(feature)?;
        if clamped {
            log::warn!("feature {feature:?} lies outside the training range; clamped to the boundary cell");
        }
        Ok(self.grid.flat_index(&self.grid.nearest_cell(&x)))
    }

    /// Fitted (zero-mean) label value at the feature's cell.
    pub fn score(&self, feature: &[f64]) -> Result<f64> {
        Ok(self.field.value_at(self.cell_of(feature)?))
    }

    /// Positive iff the score is strictly positive.
    pub fn predict(&self, feature: &[f64]) -> Result<Class> {
        Ok(if self.score(feature)? > 0.0 {
            Class::Positive
        } else {
            Class::Negative
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.grid.ensure_same(model.field.grid())?;
        if model.grid.samples() != model.transform.counts.as_slice() {
            return Err(Error::InvalidParameter("model grid does not match its quantization".into()));
        }
        Ok(model)
    }
}

/// Field values along the grid line through `anchor` parallel to `axis`, as
/// `(coordinate, value)` pairs.
pub fn extract_line_profile(model: &ClassifierModel, axis: usize, anchor: &[usize]) -> Result<Vec<(f64, f64)>> {
    let grid = &model.grid;
    if axis >= grid.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range for {} axes", grid.dim())));
    }
    if anchor.len() != grid.dim() || anchor.iter().zip(grid.samples()).any(|(a, n)| a >= n) {
        return Err(Error::AnchorOutOfRange(anchor.to_vec()));
    }
    let n = grid.samples()[axis];
    let mut cell = anchor.to_vec();
    Ok((0..n)
        .map(|j| {
            cell[axis] = j;
            (j as f64 / n as f64, model.field.value_at(grid.flat_index(&cell)))
        })
        .collect())
}

/// Writes `coordinate,value`.
pub fn write_profile_csv<W: Write>(profile: &[(f64, f64)], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["coordinate", "value"])?;
    for (x, v) in profile {
        w.write_record([x.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Features and binary labels read from a CSV with a named label column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

/// Every column except `label_col` is a numeric feature; rows whose label
/// equals `positive_class` are positive.
pub fn load_labeled_csv<R: Read>(source: R, label_col: &str, positive_class: &str) -> Result<LabeledData> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers()?.clone();
    let label_idx = header
        .iter()
        .position(|h| h.trim() == label_col)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("no label column named {label_col:?}"),
        })?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns".into(),
        });
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", header.len(), rec.len()),
            });
        }
        let mut f = Vec::with_capacity(feature_names.len());
        for (i, v) in rec.iter().enumerate() {
            if i == label_idx {
                labels.push(v.trim() == positive_class);
            } else {
                f.push(v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("{v:?} is not a number"),
                })?);
            }
        }
        features.push(f);
    }
    if features.is_empty() {
        return Err(Error::NoDataRows);
    }
    Ok(LabeledData {
        feature_names,
        features,
        labels,
    })
}

/// Accuracy on a labeled set; `metric` names which set it was measured on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub metric: String,
    /// Percentage of correctly classified examples.
    pub accuracy: f64,
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub total: usize,
}

pub fn evaluate(model: &ClassifierModel, features: &[Vec<f64>], labels: &[bool], metric: &str) -> Result<ClassificationMetrics> {
    let mut m = ClassificationMetrics {
        metric: metric.to_string(),
        accuracy: 0.0,
        true_positive: 0,
        true_negative: 0,
        false_positive: 0,
        false_negative: 0,
        total: features.len(),
    };
    for (f, &l) in features.iter().zip(labels) {
        match (model.predict(f)?, l) {
            (Class::Positive, true) => m.true_positive += 1,
            (Class::Negative, false) => m.true_negative += 1,
            (Class::Positive, false) => m.false_positive += 1,
            (Class::Negative, true) => m.false_negative += 1,
        }
    }
    if m.total > 0 {
        m.accuracy = 100.0 * (m.true_positive + m.true_negative) as f64 / m.total as f64;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::ScaleMode;

    fn xor() -> (Vec<Vec<f64>>, Vec<bool>) {
        (
            vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]],
            vec![true, false, false, true],
        )
    }

    #[test]
    fn even_counts_near_budget() {
        let c = quantization_counts(&[3.0, 1.0], 300);
        assert!(c.iter().all(|&n| n >= 2 && n % 2 == 0));
        let p = product(&c);
        assert!(p > 150.0 && p < 600.0, "{c:?}");
    }

    #[test]
    fn diagonal_covariance_gives_axis_basis() {
        // Uncorrelated columns with variances 2/7 and 8/7.
        let a = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0];
        let b = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let f: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| vec![*x, *y]).collect();
        let t = fit_transform(&f, 16).unwrap();
        assert!((t.eigenvalues[0] - 8.0 / 7.0).abs() < 1e-12);
        assert!((t.eigenvalues[1] - 2.0 / 7.0).abs() < 1e-12);
        assert!((t.basis[0][1] - 1.0).abs() < 1e-12 && t.basis[0][0].abs() < 1e-12);
        assert!((t.basis[1][0] - 1.0).abs() < 1e-12 && t.basis[1][1].abs() < 1e-12);
    }

    #[test]
    fn collinear_points_have_one_axis() {
        let f: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let t = fit_transform(&f, 16).unwrap();
        assert!(t.eigenvalues[1].abs() < 1e-12);
        assert_eq!(t.dim(), 1);
        let norm: f64 = t.basis[0].iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_class_rejected() {
        let (f, _) = xor();
        let fw = FrequencyWeight::new(2, 1e-3, ScaleMode::TwoPi).unwrap();
        assert!(matches!(train(&f, &[true; 4], &fw, 64), Err(Error::SingleClass)));
    }

    #[test]
    fn xor_layout_is_separated() {
        let (f, l) = xor();
        let fw = FrequencyWeight::new(2, 1e-3, ScaleMode::TwoPi).unwrap();
        let model = train(&f, &l, &fw, 64).unwrap();
        let m = evaluate(&model, &f, &l, "training_accuracy").unwrap();
        assert_eq!(m.accuracy, 100.0);
    }

    #[test]
    fn zero_field_predicts_negative() {
        let (f, l) = xor();
        let fw = FrequencyWeight::new(2, 1e-3, ScaleMode::TwoPi).unwrap();
        let mut model = train(&f, &l, &fw, 64).unwrap();
        model.field = SpectralField::zeros(model.grid.clone());
        assert!(f.iter().all(|x| model.predict(x).unwrap() == Class::Negative));
        let prof = extract_line_profile(&model, 0, &[0, 0]).unwrap();
        assert_eq!(prof.len(), model.grid.samples()[0]);
        assert!(prof.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn profile_anchor_checked() {
        let (f, l) = xor();
        let fw = FrequencyWeight::new(2, 1e-3, ScaleMode::TwoPi).unwrap();
        let model = train(&f, &l, &fw, 64).unwrap();
        assert!(matches!(
            extract_line_profile(&model, 0, &[0, 999]),
            Err(Error::AnchorOutOfRange(_))
        ));
        assert!(extract_line_profile(&model, 5, &[0, 0]).is_err());
    }

    #[test]
    fn labeled_csv_requires_label_column() {
        let text = "a,b,kind\n1,2,x\n3,4,y\n";
        let d = load_labeled_csv(text.as_bytes(), "kind", "x").unwrap();
        assert_eq!(d.feature_names, vec!["a", "b"]);
        assert_eq!(d.labels, vec![true, false]);
        assert!(load_labeled_csv(text.as_bytes(), "label", "x").is_err());
    }
}
