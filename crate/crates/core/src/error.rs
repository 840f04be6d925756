use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cohort is empty after inclusion filters ({excluded} rows excluded)")]
    EmptyCohort { excluded: usize },

    #[error("variable `{0}` is missing in every training row and cannot be imputed")]
    UnimputableVariable(String),

    #[error("imputation plan has no statistic for `{0}`")]
    PlanIncomplete(String),

    #[error("degenerate split: {train} training / {test} test rows")]
    DegenerateSplit { train: usize, test: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-physical dose: linear predictor {0} is not positive")]
    NonPhysicalDose(f64),

    #[error("record {index}: {source}")]
    Record {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training labels contain a single class ({0})")]
    DegenerateLabels(String),

    #[error("reference solver accepts 2..={max} rows, got {n}")]
    ProblemSize { n: usize, max: usize },

    #[error(
        "gate classified every test record as high-risk (original rmse {original_rmse:.4}, mae {original_mae:.4})"
    )]
    DegenerateGate { original_rmse: f64, original_mae: f64 },

    #[error("model format: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_record(self, index: usize) -> Self {
        Error::Record { index, source: Box::new(self) }
    }

    /// Process exit status for the command-line tool.
    ///
    /// 1 usage, 2 data/schema, 3 numerical/degenerate.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. }
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::EmptyCohort { .. }
            | Error::UnimputableVariable(_)
            | Error::PlanIncomplete(_)
            | Error::ModelFormat(_) => 2,
            Error::Record { source, .. } => source.exit_code(),
            Error::DegenerateSplit { .. }
            | Error::Domain(_)
            | Error::NonPhysicalDose(_)
            | Error::DegenerateLabels(_)
            | Error::ProblemSize { .. }
            | Error::DegenerateGate { .. } => 3,
        }
    }
}
