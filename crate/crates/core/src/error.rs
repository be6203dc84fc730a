use thiserror::Error;

/// Errors raised by the evaluation engines and the analytic modules.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("fold count {k} does not divide sample size {n}")]
    NotDivisible { n: usize, k: usize },

    #[error("sample has length {got} but the fold scheme expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("label or feature domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("enumeration needs {needed} weighted terms, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("invalid fold size m={m} for n={n}")]
    InvalidFoldSize { n: usize, m: usize },

    #[error("approximation form `{form}` is not defined for n={n}, m={m}")]
    FormDomain { form: String, n: usize, m: usize },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("linear system is inconsistent (sample is not realizable)")]
    Inconsistent,

    #[error("R = N/m must be at least 1 for a uniform covariance bound")]
    RTooSmall,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid hypothesis mixture: {0}")]
    InvalidMixture(String),

    #[error("report and stability profile disagree: {0}")]
    InputMismatch(String),

    #[error("functional needs at least two folds (k={k})")]
    TooFewFolds { k: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
