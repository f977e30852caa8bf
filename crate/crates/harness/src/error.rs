use nuisance_core::imagegeom::GeomError;
use nuisance_core::inference::InferenceError;
use nuisance_core::marginal::MarginalError;
use nuisance_core::matching::MatchingError;
use nuisance_core::proposals::ProposalError;
use nuisance_core::schedules::ScheduleError;
use thiserror::Error;

/// Failure classes; each maps to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("classifier error: {0}")]
    Classifier(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Data(_) => 2,
            HarnessError::Classifier(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl From<InferenceError> for HarnessError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Geom(g) => HarnessError::Data(g.to_string()),
            e => HarnessError::Classifier(e.to_string()),
        }
    }
}

impl From<GeomError> for HarnessError {
    fn from(e: GeomError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<ProposalError> for HarnessError {
    fn from(e: ProposalError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<ScheduleError> for HarnessError {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::Io(e) => HarnessError::Data(e.to_string()),
            e => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<MarginalError> for HarnessError {
    fn from(e: MarginalError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<MatchingError> for HarnessError {
    fn from(e: MatchingError) -> Self {
        match e {
            MatchingError::Pooling(_) | MatchingError::Pca(_) => HarnessError::Config(e.to_string()),
            MatchingError::Inference(i) => i.into(),
            e => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Data(e.to_string())
    }
}
