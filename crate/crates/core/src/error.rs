use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The variant name doubles as the machine-readable error kind reported by
/// the CLI, so renaming a variant changes the external interface.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("requested order {requested} exceeds the maximum {max}")]
    OrderOverflow { requested: usize, max: usize },

    #[error("variable lists differ: {left:?} vs {right:?}")]
    VariableMismatch { left: Vec<String>, right: Vec<String> },

    #[error("truncation orders differ: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("constant term {0}")]
    ConstantTerm(String),

    #[error("series base point does not match the expansion point (offset {0:e})")]
    BasePointMismatch(f64),

    #[error("gradient norm {norm:e} at the base point is below the floor {floor:e}")]
    CriticalPoint { norm: f64, floor: f64 },

    #[error("frame unavailable: {0}")]
    Frame(String),

    #[error("order budget exhausted: {what} needs t-order >= {min_t} and xi-order >= {min_xi}")]
    BudgetExhausted {
        what: String,
        min_t: usize,
        min_xi: usize,
    },

    #[error("indices must be strictly increasing and >= 2, got {0:?}")]
    IndexViolation(Vec<usize>),

    #[error("division failure: {0}")]
    Division(String),

    #[error("u0 is not orthogonal to e (u0 . e = {0:e})")]
    NonOrthogonal(f64),

    #[error("metric is not symmetric positive definite: {0}")]
    NonSpd(String),

    #[error("finite-difference step {step:e} is too small for derivative order {order}")]
    StepTooSmall { step: f64, order: usize },

    #[error("gradient collapsed along the numeric flow at t = {0}")]
    GradientCollapse(f64),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("node outside the chart patch: |xi| = {radius} > {patch}")]
    OutsidePatch { radius: f64, patch: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable kind, e.g. `CriticalPoint`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "Syntax",
            Error::UnknownIdentifier(_) => "UnknownIdentifier",
            Error::UnboundParameter(_) => "UnboundParameter",
            Error::Domain(_) => "Domain",
            Error::OrderOverflow { .. } => "OrderOverflow",
            Error::VariableMismatch { .. } => "VariableMismatch",
            Error::OrderMismatch { .. } => "OrderMismatch",
            Error::UnknownVariable(_) => "UnknownVariable",
            Error::ConstantTerm(_) => "ConstantTerm",
            Error::BasePointMismatch(_) => "BasePointMismatch",
            Error::CriticalPoint { .. } => "CriticalPoint",
            Error::Frame(_) => "Frame",
            Error::BudgetExhausted { .. } => "BudgetExhausted",
            Error::IndexViolation(_) => "IndexViolation",
            Error::Division(_) => "Division",
            Error::NonOrthogonal(_) => "NonOrthogonal",
            Error::NonSpd(_) => "NonSpd",
            Error::StepTooSmall { .. } => "StepTooSmall",
            Error::GradientCollapse(_) => "GradientCollapse",
            Error::Grid(_) => "Grid",
            Error::OutsidePatch { .. } => "OutsidePatch",
            Error::Config(_) => "Config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
