use std::fmt;

/// Errors returned by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("welfare value {value} at index {index} lies outside [0, 1]")]
    WelfareOutOfRange { index: usize, value: f64 },

    #[error("allocation treats {treated} individuals but the budget is {budget}")]
    BudgetExceeded { treated: usize, budget: usize },

    #[error("allocation index {index} is out of range for a population of {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("allocation lists individual {0} more than once")]
    DuplicateIndex(usize),

    #[error("unit {unit} has {size} members, below the required minimum of {min}")]
    UnitTooSmall { unit: usize, size: usize, min: usize },

    #[error("bin count {bins} exceeds the configured cap of {cap}")]
    TooManyBins { bins: u64, cap: u64 },

    #[error("Gini coefficient is undefined for an all-zero profile")]
    UndefinedGini,

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("free sampling (lambda = 0): sample the whole population")]
    FreeSampling,

    #[error("sampling plan is infeasible: sampling cost {cost} exceeds budget {budget}")]
    PlanInfeasible { cost: usize, budget: usize },

    #[error("brute force is limited to populations of at most {max} individuals, got {size}")]
    TooLargeForBruteForce { size: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl fmt::Display) -> Self {
        Error::InvalidParameter { name, reason: reason.to_string() }
    }
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl fmt::Display) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::param(name, reason))
    }
}
