//! Exhaustive reference solver for tiny dual problems.
//!
//! Every face of the feasible polytope `{0 <= a <= C, sum(a z) = 0}` is
//! described by a split of the indices into "at 0", "at C" and "free". For
//! each of the `3^n` splits the stationary point of the dual restricted to
//! that face solves a small symmetric linear system; feasible stationary
//! points are scored and the best one kept. The global maximum of a
//! quadratic over a polytope is attained at such a point (faces where the
//! restricted system is singular have their optimum on a smaller face), so
//! the result is exact up to the linear solves, including for kernels whose
//! Gram matrix is indefinite.

use super::kernel::KernelSpec;
use super::smo::violation_and_bias;
use crate::cohort::FeatureMatrix;
use crate::error::{Error, Result};

pub const REFERENCE_MAX_ROWS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// `sum(a) - 1/2 a'Qa` at the optimum.
    pub objective: f64,
}

/// Gaussian elimination with partial pivoting. Returns `None` when a pivot
/// falls below `tol` relative to the matrix scale.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-11 * scale;
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[pivot * n + col].abs() < tol {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

fn objective(q: &[f64], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * q[i * n + j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Globally maximize the soft-margin dual with box `c` by face enumeration.
pub fn reference_dual_solve(x: &FeatureMatrix, kernel: &KernelSpec, c: f64) -> Result<ReferenceSolution> {
    kernel.validate()?;
    let n = x.n_rows();
    if !(2..=REFERENCE_MAX_ROWS).contains(&n) {
        return Err(Error::ProblemSize { n, max: REFERENCE_MAX_ROWS });
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("box constraint {c} must be positive")));
    }
    let z = x.labels().ok_or_else(|| Error::Domain("reference solver needs labels".into()))?;
    if z.iter().all(|&v| v > 0.0) || z.iter().all(|&v| v < 0.0) {
        return Err(Error::DegenerateLabels("reference problem has one class".into()));
    }

    // Q_ij = z_i z_j K(x_i, x_j), computed directly from the kernel.
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = z[i] * z[j] * kernel.eval_unchecked(x.row(i), x.row(j));
        }
    }

    let feasibility = 1e-10 * c.max(1.0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut state = vec![0u8; n]; // 0: at zero, 1: at C, 2: free
    let faces = 3usize.pow(n as u32);
    for _ in 0..faces {
        if let Some(alphas) = face_stationary_point(&q, z, c, &state, feasibility) {
            let value = objective(&q, &alphas);
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, alphas));
            }
        }
        // base-3 increment
        for s in state.iter_mut() {
            *s += 1;
            if *s < 3 {
                break;
            }
            *s = 0;
        }
    }
    let (objective, alphas) = best.ok_or_else(|| Error::Domain("no feasible dual point found".into()))?;

    let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i * n + j] * alphas[j]).sum::<f64>() - 1.0).collect();
    let ub = vec![c; n];
    let (_, bias) = violation_and_bias(&alphas, &ub, z, &grad, 1e-12);
    Ok(ReferenceSolution { alphas, bias, objective })
}

fn face_stationary_point(q: &[f64], z: &[f64], c: f64, state: &[u8], feasibility: f64) -> Option<Vec<f64>> {
    let n = z.len();
    let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
    let mut alphas: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
    let bound_balance: f64 = (0..n).filter(|&i| state[i] == 1).map(|i| z[i] * c).sum();

    if free.is_empty() {
        return (bound_balance.abs() <= feasibility).then_some(alphas);
    }

    // [Q_FF  z_F] [a_F]   [1 - Q_FU c]
    // [z_F'   0 ] [nu ] = [-z_U' c   ]
    let m = free.len() + 1;
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            a[r * m + s] = q[i * n + j];
        }
        a[r * m + free.len()] = z[i];
        a[free.len() * m + r] = z[i];
        let bound_term: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| q[i * n + j] * c).sum();
        b[r] = 1.0 - bound_term;
    }
    b[free.len()] = -bound_balance;
    let solution = solve_dense(a, b, m)?;
    for (r, &i) in free.iter().enumerate() {
        let v = solution[r];
        if v < -feasibility || v > c + feasibility {
            return None;
        }
        alphas[i] = v.clamp(0.0, c);
    }
    Some(alphas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> FeatureMatrix {
        FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]], Some(vec![-1.0, 1.0])).unwrap()
    }

    #[test]
    fn analytic_pair_optimum() {
        let sol = reference_dual_solve(&pair(), &KernelSpec::Linear, 1000.0).unwrap();
        assert!((sol.alphas[0] - 0.25).abs() < 1e-12);
        assert!((sol.alphas[1] - 0.25).abs() < 1e-12);
        assert!((sol.objective - 0.25).abs() < 1e-12);
        assert!((sol.bias + 1.0).abs() < 1e-12);
    }

    #[test]
    fn clipped_pair_optimum() {
        let sol = reference_dual_solve(&pair(), &KernelSpec::Linear, 0.1).unwrap();
        assert_eq!(sol.alphas, vec![0.1, 0.1]);
        // 2(0.1) - 4(0.1)^2
        assert!((sol.objective - 0.16).abs() < 1e-12);
    }

    #[test]
    fn size_limits() {
        let one = FeatureMatrix::from_rows(&[vec![1.0]], Some(vec![1.0])).unwrap();
        assert!(matches!(reference_dual_solve(&one, &KernelSpec::Linear, 1.0), Err(Error::ProblemSize { .. })));
        let rows: Vec<Vec<f64>> = (0..13).map(|i| vec![i as f64]).collect();
        let labels = (0..13).map(|i| if i < 6 { -1.0 } else { 1.0 }).collect();
        let many = FeatureMatrix::from_rows(&rows, Some(labels)).unwrap();
        assert!(matches!(reference_dual_solve(&many, &KernelSpec::Linear, 1.0), Err(Error::ProblemSize { .. })));
    }

    #[test]
    fn dense_solver_on_known_system() {
        let x = solve_dense(vec![2.0, 1.0, 1.0, 3.0], vec![3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert!(solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0], 2).is_none());
    }
}
