//! Classification and dose-error metrics, cross-validation and model
//! comparison.

mod compare;
mod cv;
mod metrics;
mod report;

pub use compare::{compare_models, Candidate, ComparisonRow, ComparisonTable, RowOutcome, SortMetric};
pub use cv::{
    evaluate_classifier, fold_indices, kfold_cv, select_c, CandidateScore, CvReport, FoldOutcome, FoldReport,
    ModelSelection, Summary,
};
pub use metrics::{confusion, format_percent, mae, metrics, rmse, ConfusionMatrix, Metrics};
pub use report::EvalReport;

use crate::error::Result;
use crate::svm::{sign, SvmModel};

/// Anything that scores encoded feature rows; `+1` is the high-risk class.
pub trait Classifier {
    fn feature_names(&self) -> &[String];

    fn decision_value_encoded(&self, row: &[f64]) -> Result<f64>;

    fn predict_encoded(&self, row: &[f64]) -> Result<f64> {
        self.decision_value_encoded(row).map(sign)
    }
}

impl Classifier for SvmModel {
    fn feature_names(&self) -> &[String] {
        SvmModel::feature_names(self)
    }

    fn decision_value_encoded(&self, row: &[f64]) -> Result<f64> {
        SvmModel::decision_value_encoded(self, row)
    }
}
