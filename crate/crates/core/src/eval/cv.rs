use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, ConfusionMatrix, Metrics};
use super::Classifier;
use crate::cohort::FeatureMatrix;
use crate::error::{Error, Result};
use crate::gate::GateLabel;
use crate::svm::{train, KernelSpec, TrainConfig};

/// Validation-fold index sets. Every index lands in exactly one fold and
/// fold sizes differ by at most one.
///
/// Stratified assignment shuffles each class separately, lays the
/// positives after the negatives and deals positions round-robin, so each
/// fold also receives a near-equal share of each class.
pub fn fold_indices(labels: &[f64], k: usize, seed: u64, stratified: bool) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::Domain(format!("k-fold needs 2 <= k <= n, got k={k}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = if stratified {
        let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] <= 0.0).collect();
        let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] > 0.0).collect();
        neg.shuffle(&mut rng);
        pos.shuffle(&mut rng);
        neg.into_iter().chain(pos).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut folds = vec![Vec::new(); k];
    for (p, &i) in order.iter().enumerate() {
        folds[p % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FoldOutcome {
    Evaluated {
        confusion: ConfusionMatrix,
        metrics: Metrics,
    },
    /// The training side had a single class.
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub outcome: FoldOutcome,
}

/// Mean and population standard deviation over folds where a value is
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> Option<Summary> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return None;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
    Some(Summary { mean, std: var.sqrt(), n: v.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub folds: Vec<FoldReport>,
    /// Sum of the evaluated folds' confusion matrices.
    pub pooled: ConfusionMatrix,
    pub accuracy: Option<Summary>,
    pub sensitivity: Option<Summary>,
    pub specificity: Option<Summary>,
}

impl CvReport {
    pub fn skipped(&self) -> usize {
        self.folds.iter().filter(|f| matches!(f.outcome, FoldOutcome::Skipped { .. })).count()
    }

    pub fn pooled_metrics(&self) -> Option<Metrics> {
        metrics(&self.pooled).ok()
    }
}

fn labels_of(data: &FeatureMatrix) -> Result<&[f64]> {
    data.labels().ok_or_else(|| Error::Domain("cross-validation needs a labeled matrix".into()))
}

/// Evaluate a classifier on every row of a labeled matrix.
pub fn evaluate_classifier<C: Classifier + ?Sized>(model: &C, data: &FeatureMatrix) -> Result<ConfusionMatrix> {
    let labels = labels_of(data)?;
    let mut cm = ConfusionMatrix::default();
    for (row, &z) in data.rows().zip(labels) {
        cm.add(GateLabel::from_sign(z), GateLabel::from_sign(model.predict_encoded(row)?));
    }
    Ok(cm)
}

/// k-fold cross-validation of an arbitrary training procedure.
///
/// Folds run in parallel; reports come back in fold order. A fold whose
/// training side holds one class is skipped and reported as such.
pub fn kfold_cv<M, F>(data: &FeatureMatrix, k: usize, seed: u64, stratified: bool, trainer: F) -> Result<CvReport>
where
    M: Classifier,
    F: Fn(&FeatureMatrix) -> Result<M> + Sync,
{
    let labels = labels_of(data)?;
    let folds = fold_indices(labels, k, seed, stratified)?;
    let n = data.n_rows();
    let reports: Vec<Result<FoldReport>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, validation)| {
            let mut in_validation = vec![false; n];
            for &i in validation {
                in_validation[i] = true;
            }
            let training: Vec<usize> = (0..n).filter(|&i| !in_validation[i]).collect();
            let train_set = data.subset(&training);
            let positives = training.iter().filter(|&&i| labels[i] > 0.0).count();
            let outcome = if positives == 0 || positives == training.len() {
                FoldOutcome::Skipped { reason: "training side has a single class".into() }
            } else {
                let model = trainer(&train_set)?;
                let confusion = evaluate_classifier(&model, &data.subset(validation))?;
                FoldOutcome::Evaluated { confusion, metrics: metrics(&confusion)? }
            };
            Ok(FoldReport { fold: f, n_train: training.len(), n_validation: validation.len(), outcome })
        })
        .collect();
    let folds: Vec<FoldReport> = reports.into_iter().collect::<Result<_>>()?;

    let evaluated = || {
        folds.iter().filter_map(|f| match &f.outcome {
            FoldOutcome::Evaluated { confusion, metrics } => Some((confusion, metrics)),
            FoldOutcome::Skipped { .. } => None,
        })
    };
    let pooled = evaluated().fold(ConfusionMatrix::default(), |acc, (cm, _)| acc.merge(cm));
    Ok(CvReport {
        k,
        pooled,
        accuracy: summarize(evaluated().map(|(_, m)| Some(m.accuracy))),
        sensitivity: summarize(evaluated().map(|(_, m)| m.sensitivity)),
        specificity: summarize(evaluated().map(|(_, m)| m.specificity)),
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub c: f64,
    /// Balanced accuracy of the pooled validation predictions.
    pub score: Option<f64>,
    pub cv: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub kernel: KernelSpec,
    pub candidates: Vec<CandidateScore>,
    pub selected_c: f64,
}

/// Choose the box constraint from `grid` by cross-validated balanced
/// accuracy. Ties go to the smaller C.
pub fn select_c(
    data: &FeatureMatrix,
    kernel: &KernelSpec,
    base: &TrainConfig,
    grid: &[f64],
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<ModelSelection> {
    if grid.is_empty() {
        return Err(Error::Usage("C grid is empty".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = Vec::with_capacity(sorted.len());
    for &c in &sorted {
        let config = TrainConfig { c, ..base.clone() };
        let cv = kfold_cv(data, k, seed, stratified, |fold| train(fold, kernel, &config))?;
        let score = cv.pooled_metrics().and_then(|m| m.balanced_accuracy());
        candidates.push(CandidateScore { c, score, cv });
    }
    let mut selected_c = sorted[0];
    let mut best = f64::NEG_INFINITY;
    for cand in &candidates {
        if let Some(s) = cand.score {
            if s > best {
                best = s;
                selected_c = cand.c;
            }
        }
    }
    Ok(ModelSelection { kernel: *kernel, candidates, selected_c })
}
