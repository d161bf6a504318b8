use thiserror::Error;

use crate::poly::Interval;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Range bounding gave up; `best` still encloses the true range.
    #[error("subdivision budget of {limit} boxes exceeded (best enclosure [{}, {}])", best.lo(), best.hi())]
    SubdivisionBudget { limit: usize, best: Interval },

    #[error("word enumeration budget of {limit} exceeded while {context}")]
    EnumerationBudget { limit: usize, context: String },

    #[error("delta-stopping at delta = {delta} is empty or degenerate")]
    EmptyStopping { delta: f64 },

    #[error("pressure root bracket for q = {q} left [-{limit}, {limit}]")]
    BracketExpansion { q: f64, limit: f64 },

    #[error("no closed-form beta for this projection: {0}")]
    NoClosedForm(String),
}
