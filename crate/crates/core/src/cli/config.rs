use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cohort::DEFAULT_MIN_MINORITY_FRACTION;
use crate::error::{Error, Result};
use crate::gate::GateConfig;
use crate::pipeline::GateTrainingConfig;
use crate::svm::KernelSpec;

/// Effective settings of one run. Read from a flat `key=value` file,
/// overridden by flags and echoed back into the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    pub threshold: f64,
    pub kernel: KernelSpec,
    pub c_grid: Vec<f64>,
    pub cv_folds: usize,
    pub stratified: bool,
    pub balanced: bool,
    pub min_minority_fraction: f64,
    pub kkt_tolerance: f64,
    pub max_passes: usize,
    pub coefficients: Option<PathBuf>,
    pub allow_coefficient_override: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let training = GateTrainingConfig::default();
        RunConfig {
            input: None,
            schema: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            train_fraction: 0.5,
            threshold: GateConfig::default().threshold,
            kernel: training.kernel,
            c_grid: training.c_grid,
            cv_folds: training.cv_folds,
            stratified: training.stratified,
            balanced: training.balanced,
            min_minority_fraction: DEFAULT_MIN_MINORITY_FRACTION,
            kkt_tolerance: training.kkt_tolerance,
            max_passes: training.max_passes,
            coefficients: None,
            allow_coefficient_override: false,
        }
    }
}

fn usage(key: &str, value: &str) -> Error {
    Error::Usage(format!("invalid value `{value}` for `{key}`"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| usage(key, value))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(usage(key, value)),
    }
}

pub(crate) fn parse_grid(value: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = value.split(',').map(|v| parse_num("c_grid", v)).collect::<Result<_>>()?;
    if grid.is_empty() || grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(usage("c_grid", value));
    }
    Ok(grid)
}

fn optional_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = optional_path(value),
            "schema" => self.schema = optional_path(value),
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "seed" => self.seed = parse_num(key, value)?,
            "train_fraction" => self.train_fraction = parse_num(key, value)?,
            "threshold" => self.threshold = parse_num(key, value)?,
            "kernel" => self.kernel = value.parse()?,
            "c_grid" => self.c_grid = parse_grid(value)?,
            "cv_folds" => self.cv_folds = parse_num(key, value)?,
            "stratified" => self.stratified = parse_bool(key, value)?,
            "balanced" => self.balanced = parse_bool(key, value)?,
            "min_minority_fraction" => self.min_minority_fraction = parse_num(key, value)?,
            "kkt_tolerance" => self.kkt_tolerance = parse_num(key, value)?,
            "max_passes" => self.max_passes = parse_num(key, value)?,
            "coefficients" => self.coefficients = optional_path(value),
            "allow_coefficient_override" => self.allow_coefficient_override = parse_bool(key, value)?,
            _ => return Err(Error::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Usage(format!("configuration line `{line}` lacks `=`")))?;
            config.set(key.trim(), value)?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// Every field, one per line; parsing the text yields this config.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let grid: Vec<String> = self.c_grid.iter().map(f64::to_string).collect();
        let mut out = String::new();
        let _ = writeln!(out, "input={}", path(&self.input));
        let _ = writeln!(out, "schema={}", path(&self.schema));
        let _ = writeln!(out, "output_dir={}", self.output_dir.display());
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "train_fraction={}", self.train_fraction);
        let _ = writeln!(out, "threshold={}", self.threshold);
        let _ = writeln!(out, "kernel={}", self.kernel);
        let _ = writeln!(out, "c_grid={}", grid.join(","));
        let _ = writeln!(out, "cv_folds={}", self.cv_folds);
        let _ = writeln!(out, "stratified={}", self.stratified);
        let _ = writeln!(out, "balanced={}", self.balanced);
        let _ = writeln!(out, "min_minority_fraction={}", self.min_minority_fraction);
        let _ = writeln!(out, "kkt_tolerance={}", self.kkt_tolerance);
        let _ = writeln!(out, "max_passes={}", self.max_passes);
        let _ = writeln!(out, "coefficients={}", path(&self.coefficients));
        let _ = writeln!(out, "allow_coefficient_override={}", self.allow_coefficient_override);
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(usage("train_fraction", &self.train_fraction.to_string()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(usage("threshold", &self.threshold.to_string()));
        }
        if self.cv_folds < 2 {
            return Err(usage("cv_folds", &self.cv_folds.to_string()));
        }
        if !(self.min_minority_fraction > 0.0 && self.min_minority_fraction < 0.5) {
            return Err(usage("min_minority_fraction", &self.min_minority_fraction.to_string()));
        }
        if self.kkt_tolerance.is_nan() || self.kkt_tolerance <= 0.0 {
            return Err(usage("kkt_tolerance", &self.kkt_tolerance.to_string()));
        }
        Ok(())
    }

    pub fn gate(&self) -> GateConfig {
        GateConfig { threshold: self.threshold }
    }

    pub fn training(&self) -> GateTrainingConfig {
        GateTrainingConfig {
            kernel: self.kernel,
            c_grid: self.c_grid.clone(),
            cv_folds: self.cv_folds,
            stratified: self.stratified,
            balanced: self.balanced,
            kkt_tolerance: self.kkt_tolerance,
            max_passes: self.max_passes,
            min_minority_fraction: self.min_minority_fraction,
            seed: self.seed,
        }
    }
}
