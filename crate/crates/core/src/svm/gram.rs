use std::borrow::Cow;

use rayon::prelude::*;

use super::kernel::KernelSpec;
use crate::cohort::FeatureMatrix;
use crate::error::{Error, Result};

/// Largest training set for which the solver keeps the full Gram matrix.
pub const DENSE_GRAM_LIMIT: usize = 4000;

/// Dense symmetric kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

fn build_gram(spec: &KernelSpec, x: &FeatureMatrix) -> Gram {
    let n = x.n_rows();
    let upper: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (i..n).map(|j| spec.eval_unchecked(x.row(i), x.row(j))).collect()).collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Gram { n, data }
}

/// Kernel values between every pair of rows, each unordered pair computed
/// once and mirrored.
pub fn gram_matrix(spec: &KernelSpec, x: &FeatureMatrix) -> Result<Gram> {
    spec.validate()?;
    if x.n_rows() == 0 {
        return Err(Error::Domain("gram matrix of an empty matrix".into()));
    }
    Ok(build_gram(spec, x))
}

/// Kernel access for the solver: cached when small enough, recomputed
/// row by row otherwise.
pub(crate) enum KernelMatrix<'a> {
    Dense(Gram),
    OnDemand { spec: KernelSpec, x: &'a FeatureMatrix, diag: Vec<f64> },
}

impl<'a> KernelMatrix<'a> {
    pub(crate) fn new(spec: &KernelSpec, x: &'a FeatureMatrix) -> Self {
        if x.n_rows() <= DENSE_GRAM_LIMIT {
            KernelMatrix::Dense(build_gram(spec, x))
        } else {
            let diag = x.rows().map(|r| spec.eval_unchecked(r, r)).collect();
            KernelMatrix::OnDemand { spec: *spec, x, diag }
        }
    }

    #[inline]
    pub(crate) fn diag(&self, i: usize) -> f64 {
        match self {
            KernelMatrix::Dense(g) => g.get(i, i),
            KernelMatrix::OnDemand { diag, .. } => diag[i],
        }
    }

    pub(crate) fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            KernelMatrix::Dense(g) => Cow::Borrowed(g.row(i)),
            KernelMatrix::OnDemand { spec, x, .. } => {
                let xi = x.row(i);
                Cow::Owned(x.rows().map(|r| spec.eval_unchecked(xi, r)).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_rbf() {
        let x = FeatureMatrix::from_rows(&[vec![0.4, -1.0]], None).unwrap();
        let g = gram_matrix(&KernelSpec::Rbf { delta: 0.3 }, &x).unwrap();
        assert_eq!(g.as_slice(), &[1.0]);
    }

    #[test]
    fn duplicate_rows_give_constant_matrix() {
        let x = FeatureMatrix::from_rows(&[vec![0.5, 2.0, -1.0], vec![0.5, 2.0, -1.0]], None).unwrap();
        for spec in [
            KernelSpec::Linear,
            KernelSpec::Polynomial { degree: 3, offset: 1.0 },
            KernelSpec::Sigmoid { theta: 0.2 },
            KernelSpec::Rbf { delta: 1.0 },
            KernelSpec::Anova { sigma: 0.5, degree: 2 },
        ] {
            let g = gram_matrix(&spec, &x).unwrap();
            assert!(g.as_slice().iter().all(|&v| v == g.get(0, 0)), "{spec}");
        }
    }

    #[test]
    fn symmetric_by_construction() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.3, (i * i) as f64 * -0.1]).collect();
        let x = FeatureMatrix::from_rows(&rows, None).unwrap();
        let g = gram_matrix(&KernelSpec::Sigmoid { theta: -0.3 }, &x).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }
}
