//! Logistic regression, cross-validation, ROC analysis and threshold
//! selection.

mod cv;
mod logistic;
mod roc;

use thiserror::Error;

pub use cv::{
    assign_folds, kfold_cv, univariate_auc_scan, CvOptions, CvReport, FeatureAuc, FoldReport,
    DEFAULT_CV_SEED,
};
pub use logistic::{
    fit_logistic, logistic_loss_and_grad, sigmoid, LogisticModel, ScaledLogistic, Standardizer,
    TrainingMeta, GRAD_TOLERANCE, MAX_ITERATIONS,
};
pub(crate) use logistic::validate;
pub use roc::{
    f1_optimal_threshold, roc_auc, roc_curve, scores_at, specificity_threshold, threshold_serde,
    RocPoint, ThresholdChoice,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LearnError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("{rows} rows but {labels} labels")]
    DimensionMismatch { rows: usize, labels: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("{groups} groups cannot fill {k} folds")]
    TooFewGroups { groups: usize, k: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl LearnError {
    pub fn code(&self) -> &'static str {
        match self {
            LearnError::SingleClass => "SingleClass",
            LearnError::NonFiniteFeature { .. } => "NonFiniteFeature",
            LearnError::DimensionMismatch { .. } => "DimensionMismatch",
            LearnError::TooFewSamples(_) => "TooFewSamples",
            LearnError::TooFewGroups { .. } => "TooFewGroups",
            LearnError::InvalidParameter(_) => "InvalidParameter",
        }
    }
}
