use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sequences must have at least 3 positions, got {0}")]
    SequenceTooShort(usize),
    #[error("tag set must be non-empty")]
    NoTags,
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("tensor has {found} values, expected {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("invalid weight at index {index}: {value} (only finite values and -inf are allowed)")]
    InvalidWeight { index: usize, value: f64 },
    #[error("tag {tag} at position {position} is out of range for {num_tags} tags")]
    TagOutOfRange {
        position: usize,
        tag: usize,
        num_tags: usize,
    },
    #[error("no complete path with allowed transitions: {0}")]
    Unreachable(String),
    #[error("enumeration of {count} sequences exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },
    #[error("regularized max of an empty or all -inf vector")]
    EmptyMax,
    #[error("gold sequence uses a forbidden transition")]
    GoldForbidden,
    #[error("marginals are infeasible (residual {residual:e} above tolerance {tol:e})")]
    Infeasible { residual: f64, tol: f64 },
    #[error("cluster {cluster} has no finite path through it")]
    DeadCluster { cluster: usize },
    #[error("non-finite value in iterate after sweep {sweep}")]
    NonFinite { sweep: usize },
    #[error("mean field cannot encode forbidden transitions (-inf weight at index {index})")]
    ForbiddenInMeanField { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("oracle did not converge within {steps} steps (last change {change:e})")]
    OracleNoConvergence { steps: usize, change: f64 },
    #[error("wrong supervision for loss `{loss}`: {reason}")]
    WrongSupervision { loss: &'static str, reason: &'static str },
}

impl Error {
    /// True for errors caused by masks or weights that admit no valid labeling.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Unreachable(_)
                | Error::GoldForbidden
                | Error::DeadCluster { .. }
                | Error::Infeasible { .. }
        )
    }
}
