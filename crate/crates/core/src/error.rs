use thiserror::Error;

use crate::assignment::ValidationReport;
use crate::search::SearchReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid assignment: {0}")]
    Invalid(ValidationReport),

    #[error("infeasible generator spec at index {index}: {detail}")]
    InfeasibleSpec { index: usize, detail: String },

    #[error("index {index} out of range 1..={k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("k = {k} exceeds the {what} cap of {cap}; {advice}")]
    BudgetExceeded {
        what: &'static str,
        k: usize,
        cap: usize,
        advice: &'static str,
    },

    #[error("search budget exhausted after {} of {total} assignments", .partial.trials_or_count)]
    SearchBudgetExceeded {
        total: u128,
        partial: Box<SearchReport>,
    },

    #[error("underdetermined: fewer equations than unknowns ({equations} < {unknowns})")]
    Underdetermined { equations: usize, unknowns: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("malformed profile: {0}")]
    MalformedProfile(String),

    #[error("{0}")]
    OutOfRange(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
