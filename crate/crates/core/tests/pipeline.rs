use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use sobolev_fit::{
    evaluate, extract_line_profile, fit_transform, load_labeled_csv, train, write_profile_csv, Class,
    ClassifierModel, Dataset, FrequencyWeight, ScaleMode,
};

fn iris(class: &str) -> sobolev_fit::LabeledData {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv");
    load_labeled_csv(File::open(path).unwrap(), "species", class).unwrap()
}

fn fw(k: u32, lambda: f64) -> FrequencyWeight {
    FrequencyWeight::new(k, lambda, ScaleMode::TwoPi).unwrap()
}

#[test]
fn iris_transform_is_well_formed() {
    let d = iris("setosa");
    assert_eq!(d.features.len(), 150);
    assert_eq!(d.labels.iter().filter(|&&l| l).count(), 50);
    let t = fit_transform(&d.features, 12000).unwrap();
    for w in t.eigenvalues.windows(2) {
        assert!(w[0] >= w[1]);
    }
    assert!(t.eigenvalues.iter().all(|&e| e >= -1e-12));
    for (i, a) in t.basis.iter().enumerate() {
        for (j, b) in t.basis.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }
    assert!(t.counts.iter().all(|&c| c >= 2 && c % 2 == 0));
    let product: usize = t.counts.iter().product();
    assert!((product as f64 / 12000.0).ln().abs() < 0.35, "{:?}", t.counts);
    // Counts follow the standard deviations within two units after scaling.
    let scale = t.counts[0] as f64 / t.eigenvalues[0].sqrt();
    for (c, e) in t.counts.iter().zip(&t.eigenvalues) {
        if *c > 2 {
            assert!((*c as f64 - scale * e.sqrt()).abs() <= 2.0);
        }
    }
}

#[test]
fn training_predictions_match_cell_signs() {
    let d = iris("versicolor");
    let model = train(&d.features, &d.labels, &fw(3, 1e-10), 3000).unwrap();
    let mut cells: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (f, &l) in d.features.iter().zip(&d.labels) {
        cells.entry(model.cell_of(f).unwrap()).or_default().push(if l { 1.0 } else { 0.0 });
    }
    // At small λ the field reproduces each cell's averaged label, so its
    // sign matches the averaged zero-mean label wherever that is not tiny.
    for (cell, labels) in &cells {
        let avg = labels.iter().sum::<f64>() / labels.len() as f64 - model.label_mean_offset;
        if avg.abs() > 0.05 {
            assert_eq!(model.field.value_at(*cell) > 0.0, avg > 0.0);
        }
    }
}

#[test]
fn model_json_round_trip_preserves_predictions() {
    let d = iris("setosa");
    let model = train(&d.features, &d.labels, &fw(3, 1e-4), 2000).unwrap();
    let back = ClassifierModel::from_json(&model.to_json().unwrap()).unwrap();
    for f in &d.features {
        assert_eq!(model.predict(f).unwrap(), back.predict(f).unwrap());
    }
    let m = evaluate(&back, &d.features, &d.labels, "training_accuracy").unwrap();
    assert_eq!(m.metric, "training_accuracy");
    assert_eq!(m.total, 150);
    assert_eq!(m.true_positive + m.false_negative, 50);
}

#[test]
fn prediction_ignores_positive_rescaling() {
    let d = iris("virginica");
    let model = train(&d.features, &d.labels, &fw(3, 1e-4), 2000).unwrap();
    let mut scaled = model.clone();
    scaled.field = model.field.scaled(7.5);
    for f in &d.features {
        assert_eq!(model.predict(f).unwrap(), scaled.predict(f).unwrap());
    }
}

#[test]
fn out_of_range_features_are_clamped() {
    let d = iris("setosa");
    let model = train(&d.features, &d.labels, &fw(3, 1e-4), 2000).unwrap();
    let far = vec![100.0, -100.0, 100.0, -100.0];
    let cell = model.cell_of(&far).unwrap();
    assert!(cell < model.grid.total());
    assert!(matches!(model.predict(&far).unwrap(), Class::Positive | Class::Negative));
}

#[test]
fn profile_passes_through_fitted_cell() {
    let d = iris("setosa");
    let model = train(&d.features, &d.labels, &fw(3, 1e-4), 2000).unwrap();
    let cell = model.cell_of(&d.features[0]).unwrap();
    let anchor = model.grid.multi_index(cell);
    let profile = extract_line_profile(&model, 0, &anchor).unwrap();
    assert_eq!(profile.len(), model.grid.samples()[0]);
    assert_eq!(profile[anchor[0]].1, model.field.value_at(cell));
    let mut buf = Vec::new();
    write_profile_csv(&profile, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("coordinate,value\n"));
}

#[test]
fn dataset_csv_examples() {
    let d = Dataset::load_csv("x1,a\n0.25,1\n0.75,-1\n".as_bytes()).unwrap();
    assert_eq!(d.values(), &[1.0, -1.0]);
    assert_eq!(d.mean_offset(), 0.0);
    let d = Dataset::load_csv("x1,a\n0.25,2\n0.75,0\n".as_bytes()).unwrap();
    assert_eq!(d.values(), &[1.0, -1.0]);
    assert_eq!(d.mean_offset(), 1.0);
    let err = Dataset::load_csv("x1,a\n".as_bytes()).unwrap_err();
    assert!(err.to_string().contains("no data rows"));
}
