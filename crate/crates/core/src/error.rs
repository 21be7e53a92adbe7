use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FicError {
    #[error("invalid stiffness parameters: {0}")]
    InvalidStiffness(String),

    #[error("domain error: ln argument {0} must exceed 1 (w_max/x_b - k_const)")]
    Domain(f64),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular configuration: smallest singular value {sigma:.3e} of J M^-1 J^T")]
    Singular { sigma: f64 },

    #[error("integration blow-up at t = {t:.6} s")]
    Blowup { t: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T, E = FicError> = std::result::Result<T, E>;
