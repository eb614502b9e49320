use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("order must be at least 1")]
    EmptyOrder,

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not a contraction (norm {0})")]
    NotContraction(f64),

    #[error("non-finite entry")]
    NonFinite,

    #[error("function undefined at eigenvalue {0}")]
    FunctionDomain(f64),

    #[error("spectral dominance violated at index {index}: {upper} < {lower}")]
    DominanceViolated { index: usize, upper: f64, lower: f64 },

    #[error("majorization fails: {0}")]
    NotMajorized(String),

    #[error("invalid spectral list: {0}")]
    InvalidList(String),

    #[error("invalid projection system: {0}")]
    InvalidProjections(String),

    #[error("invalid index subset: {0}")]
    InvalidSubset(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible input: {0}")]
    Infeasible(String),

    #[error("oracle budget exhausted (best residual {0:e})")]
    BudgetExhausted(f64),

    #[error("memo store: {0}")]
    Memo(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
