use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::cv::evaluate_classifier;
use super::metrics::{format_percent, metrics, ConfusionMatrix, Metrics};
use crate::cohort::FeatureMatrix;
use crate::error::{Error, Result};
use crate::svm::{train, KernelSpec, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub name: String,
    pub kernel: KernelSpec,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SortMetric {
    #[default]
    Sensitivity,
    Specificity,
    Accuracy,
    /// Keep the candidate order.
    None,
}

impl std::str::FromStr for SortMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sensitivity" => Ok(SortMetric::Sensitivity),
            "specificity" => Ok(SortMetric::Specificity),
            "accuracy" => Ok(SortMetric::Accuracy),
            "none" => Ok(SortMetric::None),
            _ => Err(Error::Usage(format!("unknown sort metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RowOutcome {
    Evaluated { confusion: ConfusionMatrix, metrics: Metrics, converged: bool },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub kernel: KernelSpec,
    pub c: f64,
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

fn key(row: &ComparisonRow, by: SortMetric) -> Option<f64> {
    match &row.outcome {
        RowOutcome::Failed { .. } => None,
        RowOutcome::Evaluated { metrics, .. } => match by {
            SortMetric::Sensitivity => metrics.sensitivity,
            SortMetric::Specificity => metrics.specificity,
            SortMetric::Accuracy => Some(metrics.accuracy),
            SortMetric::None => Some(0.0),
        },
    }
}

/// Unique display names: repeated names get `#2`, `#3`, ... suffixes.
fn disambiguate(names: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    names
        .map(|name| {
            let count = seen.entry(name.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                name
            } else {
                format!("{name}#{count}")
            }
        })
        .collect()
}

/// Train every candidate on `train` and score it on `test`.
///
/// A candidate that fails to train keeps its row with the error text.
/// Rows are sorted by `sort_by`, descending, stable; undefined values and
/// failures sink to the bottom.
pub fn compare_models(
    candidates: &[Candidate],
    train_set: &FeatureMatrix,
    test_set: &FeatureMatrix,
    sort_by: SortMetric,
) -> Result<ComparisonTable> {
    if candidates.is_empty() {
        return Err(Error::Usage("no candidate models to compare".into()));
    }
    let names = disambiguate(candidates.iter().map(|c| c.name.clone()));
    let rows: Vec<ComparisonRow> = candidates
        .par_iter()
        .zip(names)
        .map(|(cand, name)| {
            let outcome = train(train_set, &cand.kernel, &cand.config)
                .and_then(|model| {
                    let confusion = evaluate_classifier(&model, test_set)?;
                    Ok(RowOutcome::Evaluated {
                        confusion,
                        metrics: metrics(&confusion)?,
                        converged: model.diagnostics().converged,
                    })
                })
                .unwrap_or_else(|e| RowOutcome::Failed { error: e.to_string() });
            ComparisonRow { name, kernel: cand.kernel, c: cand.config.c, outcome }
        })
        .collect();
    let mut table = ComparisonTable { rows };
    table.sort(sort_by);
    Ok(table)
}

impl ComparisonTable {
    /// Stable descending sort; undefined values and failures sink.
    pub fn sort(&mut self, by: SortMetric) {
        if by == SortMetric::None {
            return;
        }
        self.rows.sort_by(|a, b| match (key(a, by), key(b, by)) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
    }

    /// Aligned text table with rates in percent.
    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max("Model".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>11}  {:>11}", "Model", "Accuracy", "Sensitivity", "Specificity");
        for row in &self.rows {
            match &row.outcome {
                RowOutcome::Evaluated { metrics, .. } => {
                    let _ = writeln!(
                        out,
                        "{:<width$}  {:>8}  {:>11}  {:>11}",
                        row.name,
                        format_percent(Some(metrics.accuracy)),
                        format_percent(metrics.sensitivity),
                        format_percent(metrics.specificity)
                    );
                }
                RowOutcome::Failed { error } => {
                    let _ = writeln!(out, "{:<width$}  failed: {error}", row.name);
                }
            }
        }
        out
    }

    /// Tab-separated rows with rates as fractions; undefined values are empty.
    pub fn render_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v}"));
        let mut out = String::from("model\tkernel\tc\taccuracy\tsensitivity\tspecificity\ttp\tfp\ttn\tfn\terror\n");
        for row in &self.rows {
            match &row.outcome {
                RowOutcome::Evaluated { metrics, confusion, .. } => {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t",
                        row.name,
                        row.kernel,
                        row.c,
                        metrics.accuracy,
                        opt(metrics.sensitivity),
                        opt(metrics.specificity),
                        confusion.tp,
                        confusion.fp,
                        confusion.tn,
                        confusion.fn_
                    );
                }
                RowOutcome::Failed { error } => {
                    let _ = writeln!(out, "{}\t{}\t{}\t\t\t\t\t\t\t\t{}", row.name, row.kernel, row.c, error);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FeatureMatrix {
        FeatureMatrix::from_rows(
            &[vec![0.0, 0.0], vec![0.2, 0.1], vec![2.0, 2.0], vec![2.1, 1.8]],
            Some(vec![-1.0, -1.0, 1.0, 1.0]),
        )
        .unwrap()
    }

    fn linear(name: &str) -> Candidate {
        Candidate {
            name: name.into(),
            kernel: KernelSpec::Linear,
            config: TrainConfig { c: 10.0, ..Default::default() },
        }
    }

    #[test]
    fn separable_toy_scores_perfectly() {
        let table = compare_models(&[linear("svm")], &toy(), &toy(), SortMetric::Sensitivity).unwrap();
        let RowOutcome::Evaluated { metrics, .. } = &table.rows[0].outcome else { panic!() };
        assert_eq!((metrics.accuracy, metrics.sensitivity, metrics.specificity), (1.0, Some(1.0), Some(1.0)));
    }

    #[test]
    fn duplicate_names_are_suffixed() {
        let table = compare_models(&[linear("svm"), linear("svm")], &toy(), &toy(), SortMetric::None).unwrap();
        let names: Vec<&str> = table.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["svm", "svm#2"]);
    }

    #[test]
    fn failures_keep_their_row() {
        let bad = Candidate { config: TrainConfig { c: -1.0, ..Default::default() }, ..linear("bad") };
        let table = compare_models(&[bad, linear("ok")], &toy(), &toy(), SortMetric::Accuracy).unwrap();
        assert_eq!(table.rows[0].name, "ok");
        assert!(matches!(table.rows[1].outcome, RowOutcome::Failed { .. }));
        assert!(table.render_text().contains("failed"));
    }

    #[test]
    fn empty_candidate_list() {
        assert!(compare_models(&[], &toy(), &toy(), SortMetric::None).is_err());
    }
}
