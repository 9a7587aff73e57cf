use planhint::backend::BackendError;
use planhint::candidate_search::CandidateError;
use planhint::catalog_stats::StatsError;
use planhint::dataset_builder::DatasetError;
use planhint::label_harness::{LabelError, LabelStoreError};
use planhint::plan_space::PlanSpaceError;
use planhint::selector::SelectorError;
use planhint::{DbmsError, HintError};
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        CliError::Backend(e.to_string())
    }
}

impl From<DbmsError> for CliError {
    fn from(e: DbmsError) -> Self {
        match e {
            DbmsError::Connection(_) => CliError::Backend(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CandidateError> for CliError {
    fn from(e: CandidateError) -> Self {
        match e {
            CandidateError::Backend(b) => b.into(),
            CandidateError::Dbms(d) => d.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SelectorError> for CliError {
    fn from(e: SelectorError) -> Self {
        match e {
            SelectorError::Backend(b) => b.into(),
            SelectorError::Dbms(d) => d.into(),
            SelectorError::Candidate(c) => c.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Backend(b) => b.into(),
            DatasetError::Dbms(d) => d.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<LabelError<f64>> for CliError {
    fn from(e: LabelError<f64>) -> Self {
        match e {
            LabelError::Dbms(d) => d.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Connection(_) => CliError::Backend(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

data_errors!(LabelStoreError, PlanSpaceError, HintError, planhint::plan_model::PlanError, std::io::Error, serde_json::Error);
