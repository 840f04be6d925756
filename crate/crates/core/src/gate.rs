//! Safe/high-risk labels from dose-prediction error, and evaluation of the
//! dose model on the records a gate lets through.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::{FeatureMatrix, ImputedPatientRecord, RawPatientRecord};
use crate::error::{Error, Result};
use crate::eval::{confusion, mae, metrics, rmse, Classifier, EvalReport};
use crate::iwpc_dose::{predict_weekly_dose, IwpcCoefficients};
use crate::pipeline::{fit_gate, prepare, GateTrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateLabel {
    SafeForModel,
    HighRisk,
}

impl GateLabel {
    /// `-1` for safe, `+1` for high-risk.
    pub fn value(self) -> f64 {
        match self {
            GateLabel::SafeForModel => -1.0,
            GateLabel::HighRisk => 1.0,
        }
    }

    /// Class of a decision value or label; zero is high-risk.
    pub fn from_sign(v: f64) -> Self {
        if v >= 0.0 {
            GateLabel::HighRisk
        } else {
            GateLabel::SafeForModel
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateLabel::SafeForModel => "safe_for_model",
            GateLabel::HighRisk => "high_risk",
        }
    }
}

impl fmt::Display for GateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    /// Largest relative error, as a fraction of the therapeutic dose, that
    /// still counts as safe.
    pub threshold: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { threshold: 0.15 }
    }
}

impl GateConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        let config = GateConfig { threshold };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold > 0.0 && self.threshold < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("gate threshold {} is outside (0, 1)", self.threshold)))
        }
    }
}

/// High-risk when `|predicted - therapeutic| / therapeutic` exceeds the
/// threshold; an error exactly at the threshold is safe.
pub fn label_record(predicted_mg_week: f64, therapeutic_mg_week: f64, config: &GateConfig) -> Result<GateLabel> {
    if therapeutic_mg_week.is_nan() || therapeutic_mg_week <= 0.0 {
        return Err(Error::Domain(format!("therapeutic dose {therapeutic_mg_week} is not positive")));
    }
    let relative = (predicted_mg_week - therapeutic_mg_week).abs() / therapeutic_mg_week;
    Ok(if relative > config.threshold { GateLabel::HighRisk } else { GateLabel::SafeForModel })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCohort {
    pub labels: Vec<GateLabel>,
    /// Dose-model prediction per record, mg/week.
    pub predicted: Vec<f64>,
    pub therapeutic: Vec<f64>,
    pub high_risk: usize,
    pub safe: usize,
}

impl LabeledCohort {
    pub fn label_values(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.value()).collect()
    }
}

pub fn label_cohort(
    records: &[ImputedPatientRecord],
    coeffs: &IwpcCoefficients,
    config: &GateConfig,
) -> Result<LabeledCohort> {
    config.validate()?;
    let mut out = LabeledCohort::default();
    for (index, r) in records.iter().enumerate() {
        let step = || -> Result<(f64, GateLabel)> {
            let predicted = predict_weekly_dose(r, coeffs)?;
            Ok((predicted, label_record(predicted, r.therapeutic_dose_mg_week, config)?))
        };
        let (predicted, label) = step().map_err(|e| e.at_record(index))?;
        match label {
            GateLabel::HighRisk => out.high_risk += 1,
            GateLabel::SafeForModel => out.safe += 1,
        }
        out.labels.push(label);
        out.predicted.push(predicted);
        out.therapeutic.push(r.therapeutic_dose_mg_week);
    }
    Ok(out)
}

fn check_schema<C: Classifier + ?Sized>(features: &FeatureMatrix, classifier: &C) -> Result<()> {
    if features.names() != classifier.feature_names() {
        return Err(Error::Schema(format!(
            "classifier expects features [{}], matrix has [{}]",
            classifier.feature_names().join(", "),
            features.names().join(", ")
        )));
    }
    Ok(())
}

/// Gate predictions for every row of an encoded matrix.
pub fn classify<C: Classifier + ?Sized>(features: &FeatureMatrix, classifier: &C) -> Result<Vec<(f64, GateLabel)>> {
    check_schema(features, classifier)?;
    features
        .rows()
        .map(|row| {
            let d = classifier.decision_value_encoded(row)?;
            Ok((d, GateLabel::from_sign(d)))
        })
        .collect()
}

/// Indices the classifier considers safe for the dose model.
pub fn shrink_test_set<C: Classifier + ?Sized>(test_features: &FeatureMatrix, classifier: &C) -> Result<Vec<usize>> {
    Ok(classify(test_features, classifier)?
        .into_iter()
        .enumerate()
        .filter(|(_, (_, label))| *label == GateLabel::SafeForModel)
        .map(|(i, _)| i)
        .collect())
}

/// Which records are passed to the dose model during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateMode {
    #[default]
    Trained,
    /// Every record is safe.
    Identity,
    /// The true labels.
    Oracle,
}

impl GateMode {
    pub fn name(self) -> &'static str {
        match self {
            GateMode::Trained => "trained",
            GateMode::Identity => "identity",
            GateMode::Oracle => "oracle",
        }
    }
}

impl FromStr for GateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trained" => Ok(GateMode::Trained),
            "identity" => Ok(GateMode::Identity),
            "oracle" => Ok(GateMode::Oracle),
            _ => Err(Error::Usage(format!("unknown gate mode `{s}` (trained, identity, oracle)"))),
        }
    }
}

/// Classification metrics of `predicted` against the true labels, plus dose
/// error on all records and on those predicted safe.
pub fn gate_report(gate: &str, labeled: &LabeledCohort, predicted: &[GateLabel]) -> Result<EvalReport> {
    let cm = confusion(&labeled.labels, predicted)?;
    let rmse_original = rmse(&labeled.therapeutic, &labeled.predicted)?;
    let mae_original = mae(&labeled.therapeutic, &labeled.predicted)?;
    let kept: Vec<usize> = (0..predicted.len()).filter(|&i| predicted[i] == GateLabel::SafeForModel).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateGate { original_rmse: rmse_original, original_mae: mae_original });
    }
    let actual: Vec<f64> = kept.iter().map(|&i| labeled.therapeutic[i]).collect();
    let dose: Vec<f64> = kept.iter().map(|&i| labeled.predicted[i]).collect();
    Ok(EvalReport {
        gate: gate.to_owned(),
        confusion: cm,
        metrics: metrics(&cm)?,
        n_original: predicted.len(),
        n_shrunken: kept.len(),
        rmse_original,
        mae_original,
        rmse_shrunken: Some(rmse(&actual, &dose)?),
        mae_shrunken: Some(mae(&actual, &dose)?),
        shrink_ratio: kept.len() as f64 / predicted.len() as f64,
        cv: None,
    })
}

/// Gate predictions for a labeled test set under a control mode.
pub fn mode_predictions(mode: GateMode, labeled: &LabeledCohort) -> Option<Vec<GateLabel>> {
    match mode {
        GateMode::Trained => None,
        GateMode::Identity => Some(vec![GateLabel::SafeForModel; labeled.labels.len()]),
        GateMode::Oracle => Some(labeled.labels.clone()),
    }
}

/// Label the training records, fit the classifier, gate the test records
/// and compare dose error before and after gating.
pub fn gated_evaluation(
    train: &[RawPatientRecord],
    test: &[RawPatientRecord],
    classifier_config: &GateTrainingConfig,
    gate_config: &GateConfig,
    coeffs: &IwpcCoefficients,
) -> Result<EvalReport> {
    let prepared = prepare(train, test, classifier_config, gate_config, coeffs)?;
    let gate = fit_gate(&prepared.train_matrix, classifier_config)?;
    let predicted: Vec<GateLabel> = classify(&prepared.test_matrix, &gate.model)?.into_iter().map(|(_, l)| l).collect();
    let mut report = gate_report(GateMode::Trained.name(), &prepared.test_labels, &predicted)?;
    report.cv = gate.selected_cv().cloned();
    Ok(report)
}
