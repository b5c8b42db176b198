use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("distribution `{0}` does not satisfy the entry condition (zero mean, unit variance, finite fourth moment, bounded density); pass the override flag to use it anyway")]
    ConditionViolation(String),

    #[error("rank-deficient product at step {step}: smallest singular value ratio {ratio:e}")]
    RankDeficient { step: usize, ratio: f64 },

    #[error("matrix is not a frame: ||U^T U - I||_F = {residual:e}")]
    NotAFrame { residual: f64 },

    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),

    #[error("report is empty")]
    EmptyReport,

    #[error("rate fit: {0}")]
    RateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
