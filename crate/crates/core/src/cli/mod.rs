//! Command-line front end: `ingest | synth | train | evaluate | gate | dose | report`.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{model_version, parse_patient};
pub use config::RunConfig;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "warfarin-gate", version, about = "Gated IWPC warfarin dosing with a kernel classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides for [`RunConfig`]; each flag replaces the matching file key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Output directory.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Relative dose error above which a patient is high-risk.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// linear | polynomial:D:OFFSET | sigmoid:THETA | rbf:DELTA | anova:SIGMA:D
    #[arg(long)]
    pub kernel: Option<String>,
    /// Comma-separated box constraints tried by cross-validation.
    #[arg(long)]
    pub c_grid: Option<String>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub stratified: Option<bool>,
    /// Scale C per class by inverse class frequency.
    #[arg(long)]
    pub balanced: Option<bool>,
    #[arg(long)]
    pub min_minority_fraction: Option<f64>,
    #[arg(long)]
    pub kkt_tolerance: Option<f64>,
    #[arg(long)]
    pub max_passes: Option<usize>,
    /// Dose-model coefficient file.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    /// Accept a coefficient file that differs from the published values.
    #[arg(long)]
    pub allow_coefficient_override: bool,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            c.input = Some(v.clone());
        }
        if let Some(v) = &self.schema {
            c.schema = Some(v.clone());
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.train_fraction {
            c.train_fraction = v;
        }
        if let Some(v) = self.threshold {
            c.threshold = v;
        }
        if let Some(v) = &self.kernel {
            c.kernel = v.parse()?;
        }
        if let Some(v) = &self.c_grid {
            c.c_grid = config::parse_grid(v)?;
        }
        if let Some(v) = self.cv_folds {
            c.cv_folds = v;
        }
        if let Some(v) = self.stratified {
            c.stratified = v;
        }
        if let Some(v) = self.balanced {
            c.balanced = v;
        }
        if let Some(v) = self.min_minority_fraction {
            c.min_minority_fraction = v;
        }
        if let Some(v) = self.kkt_tolerance {
            c.kkt_tolerance = v;
        }
        if let Some(v) = self.max_passes {
            c.max_passes = v;
        }
        if let Some(v) = &self.coefficients {
            c.coefficients = Some(v.clone());
        }
        if self.allow_coefficient_override {
            c.allow_coefficient_override = true;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an IWPC export and write the normalized cohort and reports.
    Ingest(#[command(flatten)] ConfigArgs),
    /// Generate a synthetic cohort.
    Synth {
        #[arg(long, default_value_t = 4237)]
        n: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Split, label, select C by cross-validation and fit the gate.
    Train(#[command(flatten)] ConfigArgs),
    /// Score a trained gate and the dose model on the held-out split.
    Evaluate {
        /// Defaults to `<out>/model.svm`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// trained | identity | oracle
        #[arg(long, default_value = "trained")]
        gate: String,
        /// Also train and score the other kernel families at the model's C.
        #[arg(long)]
        compare: bool,
        /// sensitivity | specificity | accuracy | none
        #[arg(long, default_value = "sensitivity")]
        sort: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Gate every patient of a cohort file.
    Gate {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Imputation plan; defaults to `imputation.txt` beside the model.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// One JSON object per patient instead of the text report.
        #[arg(long)]
        jsonl: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Dose and gate decision for one patient given as key=value pairs.
    Dose {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        coefficients: Option<PathBuf>,
        #[arg(long)]
        allow_coefficient_override: bool,
        #[arg(required = true, value_name = "KEY=VALUE")]
        patient: Vec<String>,
    },
    /// Render a saved evaluation report.
    Report {
        path: PathBuf,
        /// text | tsv | json
        #[arg(long, default_value = "text")]
        format: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Synth { .. } => "synth",
            Command::Train(_) => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Gate { .. } => "gate",
            Command::Dose { .. } => "dose",
            Command::Report { .. } => "report",
        }
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: String,
    pub error: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.error.exit_code()
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

pub(crate) trait Stage<T> {
    fn stage(self, name: &str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, name: &str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage: name.to_owned(), error })
    }
}

/// Execute a parsed command, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> std::result::Result<(), StageError> {
    let name = cli.command.name();
    commands::dispatch(cli.command, out).map_err(|mut e| {
        e.stage = format!("{name}: {}", e.stage);
        e
    })
}

/// Parse `args`, run, and return the process exit status.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
