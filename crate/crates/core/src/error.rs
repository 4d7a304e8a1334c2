use thiserror::Error;

/// Errors produced by table handling, model fitting and scenario synthesis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("table must be at least 2x2, got {rows}x{cols}")]
    Dimension { rows: usize, cols: usize },
    #[error("negative count {value} at cell ({row}, {col})")]
    NegativeCell { row: usize, col: usize, value: f64 },
    #[error("non-finite count at cell ({row}, {col})")]
    NonFiniteCell { row: usize, col: usize },
    #[error("non-integer count {value} at cell ({row}, {col}) in strict mode")]
    NonIntegerCell { row: usize, col: usize, value: f64 },
    #[error("{axis} {index} has a zero total")]
    EmptyMarginal { axis: &'static str, index: usize },
    #[error("label error: {0}")]
    Label(String),
    #[error("cell ({row}, {col}) is zero; supply a positive smoothing constant")]
    ZeroCell { row: usize, col: usize },
    #[error("margins must be strictly positive")]
    ZeroMargin,
    #[error("invalid margins: {0}")]
    InvalidMargins(String),
    #[error("dimension mismatch: expected {expected:?}, got {found:?}")]
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("cut ({row_cut}, {col_cut}) is out of range")]
    CutOutOfRange { row_cut: usize, col_cut: usize },
    #[error("f_lambda requires a positive argument, got {0}")]
    NonPositiveArgument(f64),
    #[error("lambda {0} is outside the allowed range")]
    LambdaOutOfRange(f64),
    #[error("rank {k} is out of range for a {rows}x{cols} table")]
    RankOutOfRange { k: usize, rows: usize, cols: usize },
    #[error("parameters violate identification constraints: {0}")]
    InvariantViolation(String),
    #[error("no strictly positive table realises the requested parameters")]
    SimplexEscape,
    #[error("model specification is infeasible: {0}")]
    InfeasibleSpec(String),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no adequate model at level {alpha}")]
    NoAdequateModel { alpha: f64 },
    #[error("association scale factor {factor} is infeasible")]
    InfeasibleScale { factor: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable variant name for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "Dimension",
            Error::NegativeCell { .. } => "NegativeCell",
            Error::NonFiniteCell { .. } => "NonFiniteCell",
            Error::NonIntegerCell { .. } => "NonIntegerCell",
            Error::EmptyMarginal { .. } => "EmptyMarginal",
            Error::Label(_) => "Label",
            Error::ZeroCell { .. } => "ZeroCell",
            Error::ZeroMargin => "ZeroMargin",
            Error::InvalidMargins(_) => "InvalidMargins",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonConvergence(_) => "NonConvergence",
            Error::CutOutOfRange { .. } => "CutOutOfRange",
            Error::NonPositiveArgument(_) => "NonPositiveArgument",
            Error::LambdaOutOfRange(_) => "LambdaOutOfRange",
            Error::RankOutOfRange { .. } => "RankOutOfRange",
            Error::InvariantViolation(_) => "InvariantViolation",
            Error::SimplexEscape => "SimplexEscape",
            Error::InfeasibleSpec(_) => "InfeasibleSpec",
            Error::EmptyGrid => "EmptyGrid",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::NoAdequateModel { .. } => "NoAdequateModel",
            Error::InfeasibleScale { .. } => "InfeasibleScale",
            Error::InvalidScenario(_) => "InvalidScenario",
        }
    }
}
