use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("element {index} has negative eigenvalue {eigenvalue:.3e}")]
    NotPositive { index: usize, eigenvalue: f64 },

    #[error("POVM elements do not sum to the resolved operator (residual {residual:.3e})")]
    Incomplete { residual: f64 },

    #[error("basis is not orthonormal (residual {residual:.3e})")]
    NotOrthonormal { residual: f64 },

    #[error("states span a {rank}-dimensional space, expected 2")]
    SubspaceRank { rank: usize },

    #[error("element has rank greater than one (second eigenvalue {second:.3e})")]
    RankTooHigh { second: f64 },

    #[error("element is not supported on the subspace (leak {leak:.3e})")]
    SupportLeak { leak: f64 },

    #[error("zero element where a nonzero one is required")]
    ZeroElement,

    #[error("Walgate orthogonality residual {residual:.3e} exceeds tolerance")]
    WalgateFailed { residual: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed protocol tree: {0}")]
    MalformedTree(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
