//! Evaluation: metrics, the feature-based logistic baseline and
//! early-detection sweeps.

pub mod features;
pub mod logistic;
pub mod metrics;
pub mod sweep;

pub use features::{extract_features, FeatureRow, FEATURE_NAMES};
pub use logistic::{fit_logistic, fit_logistic_cv, CvResult, LogisticModel, DEFAULT_PENALTY_GRID};
pub use metrics::{auc, auc_pairwise, compute_metrics, roc_curve, Confusion, MetricsReport};
pub use sweep::{
    sweep_early_detection, sweep_with_refit, SweepCell, SweepTable, DEFAULT_COUNT_GRID, DEFAULT_TIME_GRID,
};
