//! Melody style classification: a regularized multinomial logistic model
//! over any feature scheme, with stratified k-fold evaluation.

mod cv;
mod model;
mod pipeline;

pub use self::cv::{
    cross_validate, cross_validate_detailed, stratified_folds, ClassMetrics, CrossValidation, CvConfig, EvalReport,
    FoldResult,
};
pub use self::model::{objective, train_classifier, ClassifierConfig, Example, LogLinearModel, Prediction};
pub use self::pipeline::{FeatureScheme, Featurizer, PipelineConfig, StyleClassifier};
