use nalgebra::{DMatrix, DVector};

use crate::error::{FicError, Result};

/// Smallest admissible singular value of `J M^-1 J^T`.
pub const SINGULAR_EPS: f64 = 1e-8;

/// Task-space inertia, dynamically consistent inverse and null-space projector.
#[derive(Debug, Clone)]
pub struct TaskSpace {
    /// `Λ = (J M^-1 J^T)^-1`
    pub lambda: DMatrix<f64>,
    /// `J M^-1 J^T`
    pub lambda_inv: DMatrix<f64>,
    /// `J̄^T = Λ J M^-1` (task rows × joints)
    pub jbar_t: DMatrix<f64>,
    /// `N = I - J^T J̄^T`
    pub null_projector: DMatrix<f64>,
    pub m_inv: DMatrix<f64>,
}

impl TaskSpace {
    pub fn compute(jacobian: &DMatrix<f64>, mass: &DMatrix<f64>) -> Result<Self> {
        let n = mass.nrows();
        if mass.ncols() != n || jacobian.ncols() != n {
            return Err(FicError::Dimension(format!(
                "jacobian {}x{} incompatible with mass matrix {}x{}",
                jacobian.nrows(),
                jacobian.ncols(),
                mass.nrows(),
                mass.ncols()
            )));
        }
        let m_inv = mass
            .clone()
            .cholesky()
            .ok_or_else(|| FicError::Precondition("mass matrix is not positive definite".into()))?
            .inverse();
        let j_minv = jacobian * &m_inv;
        let op = &j_minv * jacobian.transpose();
        let sigma = op.singular_values().min();
        if !(sigma >= SINGULAR_EPS) {
            return Err(FicError::Singular { sigma });
        }
        let lambda = op
            .clone()
            .try_inverse()
            .ok_or(FicError::Singular { sigma })?;
        let jbar_t = &lambda * &j_minv;
        let null_projector = DMatrix::identity(n, n) - jacobian.transpose() * &jbar_t;
        Ok(TaskSpace {
            lambda,
            lambda_inv: op,
            jbar_t,
            null_projector,
            m_inv,
        })
    }

    pub fn project_null(&self, tau: &DVector<f64>) -> DVector<f64> {
        &self.null_projector * tau
    }
}

/// Free-function form of [`TaskSpace::compute`].
pub fn task_space_quantities(jacobian: &DMatrix<f64>, mass: &DMatrix<f64>) -> Result<TaskSpace> {
    TaskSpace::compute(jacobian, mass)
}
