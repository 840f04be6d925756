//! Training-split preparation and gate fitting shared by the library entry
//! points and the command-line tool.

use serde::Serialize;

use crate::cohort::{
    encode_features, filter_unbalanced, fit_imputation, impute_all, select_features, BinaryVar, FeatureMatrix,
    ImputationPlan, ImputedPatientRecord, RawPatientRecord, DEFAULT_MIN_MINORITY_FRACTION,
};
use crate::error::{Error, Result};
use crate::eval::{select_c, CvReport, ModelSelection};
use crate::gate::{label_cohort, GateConfig, LabeledCohort};
use crate::iwpc_dose::IwpcCoefficients;
use crate::svm::{train, ClassWeights, KernelSpec, SvmModel, TrainConfig};

/// Everything needed to fit a gate classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTrainingConfig {
    pub kernel: KernelSpec,
    /// Box constraints tried by cross-validation.
    pub c_grid: Vec<f64>,
    pub cv_folds: usize,
    pub stratified: bool,
    /// Scale C per class by inverse class frequency.
    pub balanced: bool,
    pub kkt_tolerance: f64,
    pub max_passes: usize,
    pub min_minority_fraction: f64,
    pub seed: u64,
}

impl Default for GateTrainingConfig {
    fn default() -> Self {
        GateTrainingConfig {
            kernel: KernelSpec::default(),
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            cv_folds: 10,
            stratified: true,
            balanced: true,
            kkt_tolerance: 1e-3,
            max_passes: 100,
            min_minority_fraction: DEFAULT_MIN_MINORITY_FRACTION,
            seed: 0,
        }
    }
}

impl GateTrainingConfig {
    pub fn train_config(&self, c: f64) -> TrainConfig {
        TrainConfig {
            c,
            kkt_tolerance: self.kkt_tolerance,
            max_passes: self.max_passes,
            class_weights: if self.balanced { ClassWeights::Balanced } else { ClassWeights::Uniform },
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

/// Imputed, labeled and encoded train/test sets. Every statistic (imputation,
/// feature filter, scaler) comes from the training records.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub plan: ImputationPlan,
    pub removed: Vec<String>,
    pub feature_names: Vec<String>,
    pub train: Vec<ImputedPatientRecord>,
    pub test: Vec<ImputedPatientRecord>,
    pub train_labels: LabeledCohort,
    pub test_labels: LabeledCohort,
    /// Labeled with the true gate labels.
    pub train_matrix: FeatureMatrix,
    pub test_matrix: FeatureMatrix,
}

fn binary_vars(records: &[RawPatientRecord]) -> Vec<BinaryVar> {
    records.first().map(|r| r.binary.keys().copied().collect()).unwrap_or_default()
}

pub fn prepare(
    train_raw: &[RawPatientRecord],
    test_raw: &[RawPatientRecord],
    config: &GateTrainingConfig,
    gate: &GateConfig,
    coeffs: &IwpcCoefficients,
) -> Result<PreparedData> {
    if train_raw.is_empty() || test_raw.is_empty() {
        return Err(Error::DegenerateSplit { train: train_raw.len(), test: test_raw.len() });
    }
    let removed = filter_unbalanced(train_raw, config.min_minority_fraction);
    let plan = fit_imputation(train_raw)?;
    let train = impute_all(&plan, train_raw)?;
    let test = impute_all(&plan, test_raw)?;
    let feature_names = select_features(&binary_vars(train_raw), &removed);
    let train_labels = label_cohort(&train, coeffs, gate)?;
    let test_labels = label_cohort(&test, coeffs, gate)?;
    let train_matrix = encode_features(&train, &feature_names, None)?.with_labels(train_labels.label_values())?;
    let test_matrix =
        encode_features(&test, &feature_names, Some(train_matrix.scaler()))?.with_labels(test_labels.label_values())?;
    Ok(PreparedData { plan, removed, feature_names, train, test, train_labels, test_labels, train_matrix, test_matrix })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainedGate {
    #[serde(skip)]
    pub model: SvmModel,
    /// Present when more than one C was cross-validated.
    pub selection: Option<ModelSelection>,
}

impl TrainedGate {
    pub fn selected_cv(&self) -> Option<&CvReport> {
        let sel = self.selection.as_ref()?;
        sel.candidates.iter().find(|c| c.c == sel.selected_c).map(|c| &c.cv)
    }
}

/// Select C by cross-validation when the grid offers a choice, then fit on
/// the whole training matrix.
pub fn fit_gate(train_matrix: &FeatureMatrix, config: &GateTrainingConfig) -> Result<TrainedGate> {
    let (c, selection) = match config.c_grid.as_slice() {
        [] => return Err(Error::Usage("C grid is empty".into())),
        [c] => (*c, None),
        grid => {
            let sel = select_c(
                train_matrix,
                &config.kernel,
                &config.train_config(1.0),
                grid,
                config.cv_folds,
                config.seed,
                config.stratified,
            )?;
            (sel.selected_c, Some(sel))
        }
    };
    let model = train(train_matrix, &config.kernel, &config.train_config(c))?;
    Ok(TrainedGate { model, selection })
}
