//! Soft-margin dual training by sequential pairwise optimization.
//!
//! The solver minimizes `f(a) = 1/2 a'Qa - sum(a)` with `Q_ij = z_i z_j K_ij`
//! under `0 <= a_i <= C_i` and `sum(a_i z_i) = 0`. Each step takes the
//! maximal KKT violator as the first index, picks a partner, and solves the
//! two-variable problem in closed form.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gram::KernelMatrix;
use super::kernel::KernelSpec;
use super::model::{SvmModel, TrainDiagnostics};
use crate::cohort::FeatureMatrix;
use crate::error::{Error, Result};

/// Curvature floor for non positive-definite pairs.
const TAU: f64 = 1e-12;

/// How the second index of each working pair is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSelection {
    /// The partner with the largest gap in prediction error.
    MaxViolation,
    /// The partner whose closed-form step decreases the objective most.
    #[default]
    SecondOrder,
}

/// Per-class scaling of the box constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassWeights {
    Uniform,
    /// `n / (2 n_class)` for each class.
    Balanced,
    Explicit {
        negative: f64,
        positive: f64,
    },
}

impl ClassWeights {
    /// (negative, positive) weights for the given labels.
    pub fn resolve(&self, labels: &[f64]) -> (f64, f64) {
        match *self {
            ClassWeights::Uniform => (1.0, 1.0),
            ClassWeights::Explicit { negative, positive } => (negative, positive),
            ClassWeights::Balanced => {
                let n = labels.len() as f64;
                let pos = labels.iter().filter(|&&z| z > 0.0).count() as f64;
                let neg = n - pos;
                (n / (2.0 * neg), n / (2.0 * pos))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Soft-margin box constraint.
    pub c: f64,
    pub kkt_tolerance: f64,
    /// Multipliers at or below this are dropped from the model.
    pub numeric_epsilon: f64,
    /// Iteration budget in units of the training-set size.
    pub max_passes: usize,
    pub class_weights: ClassWeights,
    pub selection: PairSelection,
    /// Seeds the scan order used to break ties in pair selection.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            kkt_tolerance: 1e-3,
            numeric_epsilon: 1e-12,
            max_passes: 100,
            class_weights: ClassWeights::Uniform,
            selection: PairSelection::SecondOrder,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.c)
            || !positive(self.kkt_tolerance)
            || self.numeric_epsilon.is_nan()
            || self.numeric_epsilon < 0.0
        {
            return Err(Error::Domain(format!(
                "invalid solver settings: C={}, tol={}, eps={}",
                self.c, self.kkt_tolerance, self.numeric_epsilon
            )));
        }
        if let ClassWeights::Explicit { negative, positive: pos } = self.class_weights {
            if !positive(negative) || !positive(pos) {
                return Err(Error::Domain("class weights must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Full dual state at the end of training, including zero multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    pub bias: f64,
    /// `sum(a) - 1/2 a'Qa`
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest gap `max_up(-z G) - min_low(-z G)` at termination.
    pub max_violation: f64,
}

#[inline]
fn in_up(alpha: f64, ub: f64, z: f64) -> bool {
    if z > 0.0 {
        alpha < ub
    } else {
        alpha > 0.0
    }
}

#[inline]
fn in_low(alpha: f64, ub: f64, z: f64) -> bool {
    if z > 0.0 {
        alpha > 0.0
    } else {
        alpha < ub
    }
}

/// Largest KKT gap and the bias for a dual point with gradient `grad`.
///
/// The bias averages `-z_t G_t` over multipliers strictly inside their box;
/// with none inside it is the midpoint of the interval the bound multipliers
/// allow.
pub(crate) fn violation_and_bias(alphas: &[f64], ub: &[f64], z: &[f64], grad: &[f64], eps: f64) -> (f64, f64) {
    let mut up_max = f64::NEG_INFINITY;
    let mut low_min = f64::INFINITY;
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    // bounds on b implied by multipliers at 0 or C
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for t in 0..alphas.len() {
        let r = -z[t] * grad[t];
        let up = in_up(alphas[t], ub[t], z[t]);
        let low = in_low(alphas[t], ub[t], z[t]);
        if up {
            up_max = up_max.max(r);
        }
        if low {
            low_min = low_min.min(r);
        }
        let slack = eps * ub[t].max(1.0);
        if alphas[t] > slack && alphas[t] < ub[t] - slack {
            free_sum += r;
            free_n += 1;
        } else if (alphas[t] <= slack) == (z[t] > 0.0) {
            // at 0 with z = +1, or at C with z = -1
            lower = lower.max(r);
        } else {
            upper = upper.min(r);
        }
    }
    let violation = (up_max - low_min).max(0.0);
    let bias = if free_n > 0 {
        free_sum / free_n as f64
    } else {
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        }
    };
    (violation, bias)
}

/// `G = Q a - 1`, accumulated in index order.
pub(crate) fn dual_gradient(km: &KernelMatrix<'_>, alphas: &[f64], z: &[f64]) -> Vec<f64> {
    let n = alphas.len();
    let mut grad = vec![-1.0; n];
    for t in (0..n).filter(|&t| alphas[t] != 0.0) {
        let row = km.row(t);
        let w = alphas[t] * z[t];
        for s in 0..n {
            grad[s] += z[s] * w * row[s];
        }
    }
    grad
}

fn check_labels(x: &FeatureMatrix) -> Result<&[f64]> {
    let z = x.labels().ok_or_else(|| Error::Domain("training matrix has no labels".into()))?;
    let pos = z.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == z.len() {
        let class = if pos == 0 { "all -1" } else { "all +1" };
        return Err(Error::DegenerateLabels(class.into()));
    }
    Ok(z)
}

/// Train and return both the compact model and the full dual state.
pub fn train_detailed(
    x: &FeatureMatrix,
    kernel: &KernelSpec,
    config: &TrainConfig,
) -> Result<(SvmModel, DualSolution)> {
    kernel.validate()?;
    config.validate()?;
    let z = check_labels(x)?;
    let n = x.n_rows();
    let (w_neg, w_pos) = config.class_weights.resolve(z);
    let ub: Vec<f64> = z.iter().map(|&zi| config.c * if zi > 0.0 { w_pos } else { w_neg }).collect();

    let km = KernelMatrix::new(kernel, x);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));

    let max_iter = config.max_passes.saturating_mul(n).max(1);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let mut gmin = f64::INFINITY;
        let mut j_violation = usize::MAX;
        for &t in &order {
            let r = -z[t] * grad[t];
            if r > gmax && in_up(alpha[t], ub[t], z[t]) {
                gmax = r;
                i = t;
            }
            if r < gmin && in_low(alpha[t], ub[t], z[t]) {
                gmin = r;
                j_violation = t;
            }
        }
        if i == usize::MAX || j_violation == usize::MAX || gmax - gmin < config.kkt_tolerance {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let row_i = km.row(i);
        let k_ii = km.diag(i);
        let j = match config.selection {
            PairSelection::MaxViolation => j_violation,
            PairSelection::SecondOrder => {
                let (mut best, mut best_gain) = (j_violation, f64::NEG_INFINITY);
                for &t in &order {
                    let r = -z[t] * grad[t];
                    if r < gmax && in_low(alpha[t], ub[t], z[t]) {
                        let b = gmax - r;
                        let a = k_ii + km.diag(t) - 2.0 * row_i[t];
                        let gain = b * b / if a > 0.0 { a } else { TAU };
                        if gain > best_gain {
                            best_gain = gain;
                            best = t;
                        }
                    }
                }
                best
            }
        };
        let gap = gmax + z[j] * grad[j];
        let row_j = km.row(j);
        let curvature = k_ii + km.diag(j) - 2.0 * row_i[j];
        let curvature = if curvature > 0.0 { curvature } else { TAU };
        let room_i = if z[i] > 0.0 { ub[i] - alpha[i] } else { alpha[i] };
        let room_j = if z[j] > 0.0 { alpha[j] } else { ub[j] - alpha[j] };
        let step = (gap / curvature).min(room_i).min(room_j);

        let mut new_i = alpha[i] + z[i] * step;
        let mut new_j = alpha[j] - z[j] * step;
        if step == room_i {
            new_i = if z[i] > 0.0 { ub[i] } else { 0.0 };
        }
        if step == room_j {
            new_j = if z[j] > 0.0 { 0.0 } else { ub[j] };
        }
        new_i = new_i.clamp(0.0, ub[i]);
        new_j = new_j.clamp(0.0, ub[j]);
        let d_i = (new_i - alpha[i]) * z[i];
        let d_j = (new_j - alpha[j]) * z[j];
        alpha[i] = new_i;
        alpha[j] = new_j;
        for s in 0..n {
            grad[s] += z[s] * (d_i * row_i[s] + d_j * row_j[s]);
        }
    }

    // final statistics from a freshly accumulated gradient
    let grad = dual_gradient(&km, &alpha, z);
    let (max_violation, bias) = violation_and_bias(&alpha, &ub, z, &grad, config.numeric_epsilon);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>();

    let keep: Vec<usize> = (0..n).filter(|&t| alpha[t] > config.numeric_epsilon).collect();
    let support_vectors = keep.iter().flat_map(|&t| x.row(t).iter().copied()).collect();
    let model = SvmModel::from_parts(
        *kernel,
        x.names().to_vec(),
        x.scaler().clone(),
        support_vectors,
        keep.iter().map(|&t| alpha[t]).collect(),
        keep.iter().map(|&t| z[t]).collect(),
        bias,
        TrainDiagnostics {
            converged,
            iterations,
            max_kkt_violation: max_violation,
            dual_objective: objective,
            c: config.c,
        },
    )?;
    let solution =
        DualSolution { alphas: alpha, upper_bounds: ub, bias, objective, iterations, converged, max_violation };
    Ok((model, solution))
}

/// Train a soft-margin kernel classifier on a labeled matrix.
pub fn train(x: &FeatureMatrix, kernel: &KernelSpec, config: &TrainConfig) -> Result<SvmModel> {
    train_detailed(x, kernel, config).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points() -> FeatureMatrix {
        FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]], Some(vec![-1.0, 1.0])).unwrap()
    }

    fn hard(c: f64) -> TrainConfig {
        TrainConfig { c, kkt_tolerance: 1e-9, ..TrainConfig::default() }
    }

    #[test]
    fn roundoff_multiplier_counts_as_bound() {
        let (ub, z, grad) = ([0.1; 3], [1.0, -1.0, 1.0], [-0.6, -0.2, -0.5]);
        let exact = violation_and_bias(&[0.1, 0.1, 0.0], &ub, &z, &grad, 1e-12);
        let noisy = violation_and_bias(&[0.1, 0.1, 7e-17], &ub, &z, &grad, 1e-12);
        assert_eq!(exact.1, noisy.1);
    }

    #[test]
    fn two_point_linear_margin() {
        let (model, sol) = train_detailed(&two_points(), &KernelSpec::Linear, &hard(1000.0)).unwrap();
        assert!((sol.alphas[0] - 0.25).abs() < 1e-12 && (sol.alphas[1] - 0.25).abs() < 1e-12);
        assert!((sol.bias + 1.0).abs() < 1e-12);
        assert!((sol.objective - 0.25).abs() < 1e-12);
        assert!((model.decision_value(&[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(model.decision_value(&[1.0, 1.0]).unwrap().abs() < 1e-12);
        assert!((model.decision_value(&[0.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(sol.converged);
    }

    #[test]
    fn two_point_clipped_by_box() {
        let (_, sol) = train_detailed(&two_points(), &KernelSpec::Linear, &hard(0.1)).unwrap();
        assert_eq!(sol.alphas, vec![0.1, 0.1]);
    }

    #[test]
    fn xor_with_quadratic_kernel() {
        let x = FeatureMatrix::from_rows(
            &[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            Some(vec![-1.0, -1.0, 1.0, 1.0]),
        )
        .unwrap();
        let model = train(&x, &KernelSpec::Polynomial { degree: 2, offset: 1.0 }, &hard(1e4)).unwrap();
        for (row, &z) in x.rows().zip(x.labels().unwrap()) {
            assert_eq!(model.predict(row).unwrap(), z);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]], Some(vec![1.0, 1.0])).unwrap();
        assert!(matches!(train(&x, &KernelSpec::Linear, &hard(1.0)), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn iteration_budget_flags_non_convergence() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()]).collect();
        let labels = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let x = FeatureMatrix::from_rows(&rows, Some(labels)).unwrap();
        let cfg = TrainConfig { c: 100.0, kkt_tolerance: 1e-12, max_passes: 0, ..TrainConfig::default() };
        let (model, sol) = train_detailed(&x, &KernelSpec::Rbf { delta: 0.5 }, &cfg).unwrap();
        assert!(!sol.converged);
        assert!(!model.diagnostics().converged);
        assert!(sol.max_violation > 0.0);
    }

    #[test]
    fn balanced_weights() {
        let labels = [1.0, -1.0, -1.0, -1.0];
        let (neg, pos) = ClassWeights::Balanced.resolve(&labels);
        assert!((neg - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(pos, 2.0);
    }
}
