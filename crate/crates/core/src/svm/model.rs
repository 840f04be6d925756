use std::fmt::Write as _;
use std::path::Path;

use super::kernel::KernelSpec;
use crate::cohort::{ScaleParam, Scaler};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "warfarin-gate-svm/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub max_kkt_violation: f64,
    pub dual_objective: f64,
    pub c: f64,
}

/// Trained kernel expansion `y(x) = sum_i a_i z_i K(x_i, x) + b`.
///
/// Support vectors are stored in the encoded (standardized) space; raw
/// inputs go through the stored scaler first.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    kernel: KernelSpec,
    feature_names: Vec<String>,
    scaler: Scaler,
    support_vectors: Vec<f64>,
    alphas: Vec<f64>,
    sv_labels: Vec<f64>,
    bias: f64,
    diagnostics: TrainDiagnostics,
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

impl SvmModel {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        kernel: KernelSpec,
        feature_names: Vec<String>,
        scaler: Scaler,
        support_vectors: Vec<f64>,
        alphas: Vec<f64>,
        sv_labels: Vec<f64>,
        bias: f64,
        diagnostics: TrainDiagnostics,
    ) -> Result<Self> {
        let width = feature_names.len();
        if scaler.params.len() != width
            || support_vectors.len() != alphas.len() * width
            || sv_labels.len() != alphas.len()
        {
            return Err(Error::ModelFormat("inconsistent model dimensions".into()));
        }
        Ok(SvmModel { kernel, feature_names, scaler, support_vectors, alphas, sv_labels, bias, diagnostics })
    }

    /// A model with no support vectors: the decision value is `bias`
    /// everywhere. Useful as a constant gate.
    pub fn constant(feature_names: Vec<String>, bias: f64) -> Self {
        let width = feature_names.len();
        SvmModel {
            kernel: KernelSpec::Linear,
            feature_names,
            scaler: Scaler::identity(width),
            support_vectors: Vec::new(),
            alphas: Vec::new(),
            sv_labels: Vec::new(),
            bias,
            diagnostics: TrainDiagnostics {
                converged: true,
                iterations: 0,
                max_kkt_violation: 0.0,
                dual_objective: 0.0,
                c: 1.0,
            },
        }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sv_labels(&self) -> &[f64] {
        &self.sv_labels
    }

    pub fn n_support_vectors(&self) -> usize {
        self.alphas.len()
    }

    pub fn support_vector(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.support_vectors[i * w..(i + 1) * w]
    }

    pub fn diagnostics(&self) -> &TrainDiagnostics {
        &self.diagnostics
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::Domain(format!("input has {} features, model expects {}", x.len(), self.n_features())));
        }
        Ok(())
    }

    /// Decision value for an already-encoded row.
    pub fn decision_value_encoded(&self, row: &[f64]) -> Result<f64> {
        self.check_dim(row)?;
        let w = self.n_features();
        let sum: f64 = self
            .support_vectors
            .chunks_exact(w.max(1))
            .zip(self.alphas.iter().zip(&self.sv_labels))
            .map(|(sv, (a, z))| a * z * self.kernel.eval_unchecked(sv, row))
            .sum();
        Ok(sum + self.bias)
    }

    /// Decision value for a raw feature vector.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.decision_value_encoded(&self.scaler.apply(x))
    }

    /// `+1` when the decision value is `>= 0`, else `-1`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.decision_value(x).map(sign)
    }

    /// Serialize to the versioned text format. Reals carry 17 significant
    /// digits, so a parse restores every value exactly.
    pub fn to_text(&self) -> String {
        let d = &self.diagnostics;
        let mut out = String::new();
        let _ = writeln!(out, "format={MODEL_FORMAT}");
        let _ = writeln!(out, "kernel={}", self.kernel);
        let _ = writeln!(out, "bias={}", sci(self.bias));
        let _ = writeln!(out, "c={}", sci(d.c));
        let _ = writeln!(out, "converged={}", d.converged);
        let _ = writeln!(out, "iterations={}", d.iterations);
        let _ = writeln!(out, "max_kkt_violation={}", sci(d.max_kkt_violation));
        let _ = writeln!(out, "dual_objective={}", sci(d.dual_objective));
        let _ = writeln!(out, "n_features={}", self.n_features());
        for (name, p) in self.feature_names.iter().zip(&self.scaler.params) {
            let _ = writeln!(out, "feature={name}\t{}\t{}", sci(p.mean), sci(p.std));
        }
        let _ = writeln!(out, "n_support_vectors={}", self.n_support_vectors());
        for i in 0..self.n_support_vectors() {
            let _ = write!(out, "sv={}\t{}", self.sv_labels[i] as i8, sci(self.alphas[i]));
            for v in self.support_vector(i) {
                let _ = write!(out, "\t{}", sci(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |m: String| Error::ModelFormat(m);
        let real = |s: &str| s.trim().parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| err(format!("missing `{key}`")))?;
            match line.split_once('=') {
                Some((k, v)) if k == key => Ok(v.to_owned()),
                _ => Err(err(format!("expected `{key}=`, found `{line}`"))),
            }
        };
        let format = field("format")?;
        if format != MODEL_FORMAT {
            return Err(err(format!("unsupported format `{format}`")));
        }
        let kernel: KernelSpec = field("kernel")?.parse().map_err(|e: Error| err(e.to_string()))?;
        let bias = real(&field("bias")?)?;
        let c = real(&field("c")?)?;
        let converged = field("converged")?.parse::<bool>().map_err(|e| err(e.to_string()))?;
        let iterations = field("iterations")?.parse::<usize>().map_err(|e| err(e.to_string()))?;
        let max_kkt_violation = real(&field("max_kkt_violation")?)?;
        let dual_objective = real(&field("dual_objective")?)?;
        let width = field("n_features")?.parse::<usize>().map_err(|e| err(e.to_string()))?;
        let mut names = Vec::with_capacity(width);
        let mut params = Vec::with_capacity(width);
        for _ in 0..width {
            let value = field("feature")?;
            let parts: Vec<&str> = value.split('\t').collect();
            if parts.len() != 3 {
                return Err(err(format!("bad feature line `{value}`")));
            }
            names.push(parts[0].to_owned());
            params.push(ScaleParam { mean: real(parts[1])?, std: real(parts[2])? });
        }
        let n_sv = field("n_support_vectors")?.parse::<usize>().map_err(|e| err(e.to_string()))?;
        let mut alphas = Vec::with_capacity(n_sv);
        let mut labels = Vec::with_capacity(n_sv);
        let mut svs = Vec::with_capacity(n_sv * width);
        for _ in 0..n_sv {
            let value = field("sv")?;
            let parts: Vec<&str> = value.split('\t').collect();
            if parts.len() != width + 2 {
                return Err(err(format!("support vector line has {} fields", parts.len())));
            }
            let z = real(parts[0])?;
            if z != 1.0 && z != -1.0 {
                return Err(err(format!("support vector label {z}")));
            }
            labels.push(z);
            alphas.push(real(parts[1])?);
            for p in &parts[2..] {
                svs.push(real(p)?);
            }
        }
        if let Some(extra) = lines.next() {
            return Err(err(format!("trailing content `{extra}`")));
        }
        SvmModel::from_parts(
            kernel,
            names,
            Scaler { params },
            svs,
            alphas,
            labels,
            bias,
            TrainDiagnostics { converged, iterations, max_kkt_violation, dual_objective, c },
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SvmModel::from_text(&text)
    }
}

/// Class from a decision value; zero maps to `+1`.
#[inline]
pub fn sign(decision: f64) -> f64 {
    if decision >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention() {
        assert_eq!(sign(2.3), 1.0);
        assert_eq!(sign(-0.1), -1.0);
        assert_eq!(sign(0.0), 1.0);
        assert_eq!(sign(-0.0), 1.0);
    }

    #[test]
    fn constant_model_predicts_bias_sign() {
        let m = SvmModel::constant(vec!["a".into(), "b".into()], -1.0);
        assert_eq!(m.decision_value(&[3.0, 4.0]).unwrap(), -1.0);
        assert_eq!(m.predict(&[3.0, 4.0]).unwrap(), -1.0);
        assert!(matches!(m.decision_value(&[3.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_wrong_format_version() {
        let text = SvmModel::constant(vec!["a".into()], 0.5).to_text().replace("svm/1", "svm/9");
        assert!(matches!(SvmModel::from_text(&text), Err(Error::ModelFormat(_))));
    }
}
