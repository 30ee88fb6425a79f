use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("hypothesis error: {0}")]
    Hypothesis(String),

    #[error("polyhedral multiplier set is empty")]
    InfeasiblePolyhedron,

    #[error("property violation ({property}): {witness}")]
    PropertyViolation { property: String, witness: String },

    #[error("growth fit failed: {0}")]
    GrowthFit(String),

    #[error("constant gap: m_J * |gamma|^2 = {lhs} is not below m_A = {m_a}")]
    ConstantGap { lhs: f64, m_a: f64 },

    #[error("inner solve diverged after {iterations} iterations (residual {residual:e})")]
    InnerDivergence { iterations: usize, residual: f64 },

    #[error("ball schedule exhausted at r = {r}, s = {s}")]
    ScheduleExhausted { r: f64, s: f64 },

    #[error("dimension limit: {0}")]
    DimensionLimit(String),

    #[error("grid of {points} points exceeds the budget of {budget}")]
    BudgetExceeded { points: f64, budget: f64 },

    #[error("hypothesis gate: {0}")]
    HypothesisGate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
