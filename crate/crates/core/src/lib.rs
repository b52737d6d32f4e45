//! Sobolev-regularized fitting of scattered data on the periodic unit cube.
//!
//! A fit minimizes `‖f‖² + λ‖∇^k f‖² + Σ (f(p_i) − a_i)²` over functions
//! sampled on a uniform grid. Three solvers are provided (gradient descent,
//! a direct linear solve and a truncated kernel expansion), together with
//! tools for choosing `λ` and a binary classifier built on top.

pub mod classify;
pub mod data;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod select;
pub mod solvers;
pub mod spectral;
pub mod weight;

pub use classify::{
    default_lambda_grid, evaluate, extract_line_profile, fit_transform, load_labeled_csv, train, train_auto, write_profile_csv, Class,
    ClassificationMetrics, ClassifierModel, FeatureTransform, LabeledData,
};
pub use data::{bin_to_grid, even_extension, CellDatum, Dataset, ExtensionMode, ExtensionSpec, GriddedData};
pub use error::{Error, Result};
pub use field::SpectralField;
pub use grid::GridSpec;
pub use solvers::{
    default_truncation, kernel_predict, kernel_value, solve_gd, solve_kernel, solve_linear, solve_linear_with,
    stability_bound, FitReport, GDParams, KernelModel, LinearMethod, LinearSystem, SolverKind,
};
pub use select::{
    log_space, norm_derivative_root, select_lambda_descent, sweep_lambda, DescentOptions, DescentState,
    LambdaSweepResult, NormQuadratic, NormRoot, PeakLocation, RootKind,
};
pub use spectral::{
    bracket_norm_sq, el_residual, kgrad_norm_sq, l2_norm_sq, l2_norm_sq_space, objective, objective_gradient,
    sobolev_norm_sq, sup_norm_bound_constant,
};
pub use weight::{frequency_weight, penalty_table, FrequencyWeight, ScaleMode};
