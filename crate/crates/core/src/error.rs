use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("power must be positive to express in dBm, got {0} W")]
    NonPositivePower(f64),
}

impl ParamError {
    pub(crate) fn invalid(field: &'static str, reason: &str) -> Self {
        ParamError::Invalid {
            field,
            reason: reason.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    /// Net power consumption is not positive; the parameterisation is not physical.
    #[error("total power consumption U_TP = {0} W is not positive")]
    NonPositiveConsumption(f64),
    #[error("allocation has {got} subcarriers, channel has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no splitting ratio on the grid admits a feasible allocation")]
    Infeasible,
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}
