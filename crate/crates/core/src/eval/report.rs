use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cv::CvReport;
use super::metrics::{format_percent, ConfusionMatrix, Metrics};

/// Classification quality of the gate and dose error before and after
/// removing the records it flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub gate: String,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub n_original: usize,
    pub n_shrunken: usize,
    pub rmse_original: f64,
    pub mae_original: f64,
    /// `None` when no record was retained.
    pub rmse_shrunken: Option<f64>,
    pub mae_shrunken: Option<f64>,
    /// Retained fraction of the test set.
    pub shrink_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvReport>,
}

impl EvalReport {
    pub fn rmse_improvement(&self) -> Option<f64> {
        self.rmse_shrunken.map(|s| (self.rmse_original - s) / self.rmse_original)
    }

    pub fn mae_improvement(&self) -> Option<f64> {
        self.mae_shrunken.map(|s| (self.mae_original - s) / self.mae_original)
    }

    pub fn render_text(&self) -> String {
        let dose = |v: Option<f64>| v.map_or_else(|| "\u{2014}".to_owned(), |v| format!("{v:.2}"));
        let mut out = String::new();
        let _ = writeln!(out, "gate: {}", self.gate);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<12}  {:>8}  {:>11}  {:>11}", "", "Accuracy", "Sensitivity", "Specificity");
        let _ = writeln!(
            out,
            "{:<12}  {:>8}  {:>11}  {:>11}",
            "test set",
            format_percent(Some(self.metrics.accuracy)),
            format_percent(self.metrics.sensitivity),
            format_percent(self.metrics.specificity)
        );
        let c = &self.confusion;
        let _ = writeln!(out, "confusion: tp={} fp={} tn={} fn={}", c.tp, c.fp, c.tn, c.fn_);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<16}  {:>6}  {:>8}  {:>8}", "", "n", "RMSE", "MAE");
        let _ = writeln!(
            out,
            "{:<16}  {:>6}  {:>8}  {:>8}",
            "original test",
            self.n_original,
            dose(Some(self.rmse_original)),
            dose(Some(self.mae_original))
        );
        let _ = writeln!(
            out,
            "{:<16}  {:>6}  {:>8}  {:>8}",
            "shrunken test",
            self.n_shrunken,
            dose(self.rmse_shrunken),
            dose(self.mae_shrunken)
        );
        let _ = writeln!(out, "shrink ratio: {}%", format_percent(Some(self.shrink_ratio)));
        out
    }

    /// `key\tvalue` lines, fractions rather than percentages.
    pub fn render_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v}"));
        let c = &self.confusion;
        let pairs: [(&str, String); 16] = [
            ("gate", self.gate.clone()),
            ("accuracy", format!("{}", self.metrics.accuracy)),
            ("sensitivity", opt(self.metrics.sensitivity)),
            ("specificity", opt(self.metrics.specificity)),
            ("tp", c.tp.to_string()),
            ("fp", c.fp.to_string()),
            ("tn", c.tn.to_string()),
            ("fn", c.fn_.to_string()),
            ("n_original", self.n_original.to_string()),
            ("n_shrunken", self.n_shrunken.to_string()),
            ("rmse_original", format!("{}", self.rmse_original)),
            ("mae_original", format!("{}", self.mae_original)),
            ("rmse_shrunken", opt(self.rmse_shrunken)),
            ("mae_shrunken", opt(self.mae_shrunken)),
            ("shrink_ratio", format!("{}", self.shrink_ratio)),
            ("cv_folds", self.cv.as_ref().map_or_else(String::new, |cv| cv.k.to_string())),
        ];
        let mut out = String::from("metric\tvalue\n");
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}\t{v}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> crate::error::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::Error::Schema(format!("evaluation report: {e}")))
    }
}
