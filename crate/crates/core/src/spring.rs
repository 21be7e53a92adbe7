//! Saturating nonlinear spring used in the divergence phase.
//!
//! Inside the virtual boundary `x_b` the stiffness grows exponentially from
//! `k_const + 1` up to `k_max = w_max / x_b`; beyond it the stiffness decays as
//! `w_max / |x|` so the force stays pinned at `w_max`.

use serde::{Deserialize, Serialize};

use crate::error::{FicError, Result};

/// Exponent coefficient of the inner branch, `ln(w_max/x_b - k_const) / x_b^2`.
pub fn beta_squared(k_const: f64, w_max: f64, x_b: f64) -> Result<f64> {
    let arg = w_max / x_b - k_const;
    if !(arg > 1.0) {
        return Err(FicError::Domain(arg));
    }
    Ok(arg.ln() / (x_b * x_b))
}

/// Per-DoF spring definition. Units follow the DoF (N, m or N·m, rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StiffnessSpec", into = "StiffnessSpec")]
pub struct StiffnessParams {
    k_const: f64,
    w_max: f64,
    x_b: f64,
    beta_sq: f64,
}

/// Wire form of [`StiffnessParams`]; `beta_sq` is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StiffnessSpec {
    pub k_const: f64,
    pub w_max: f64,
    pub x_b: f64,
}

impl TryFrom<StiffnessSpec> for StiffnessParams {
    type Error = FicError;

    fn try_from(spec: StiffnessSpec) -> Result<Self> {
        StiffnessParams::new(spec.k_const, spec.w_max, spec.x_b)
    }
}

impl From<StiffnessParams> for StiffnessSpec {
    fn from(p: StiffnessParams) -> Self {
        StiffnessSpec {
            k_const: p.k_const,
            w_max: p.w_max,
            x_b: p.x_b,
        }
    }
}

impl StiffnessParams {
    pub fn new(k_const: f64, w_max: f64, x_b: f64) -> Result<Self> {
        if !(w_max > 0.0 && w_max.is_finite()) {
            return Err(FicError::InvalidStiffness(format!("w_max must be > 0, got {w_max}")));
        }
        if !(x_b > 0.0 && x_b.is_finite()) {
            return Err(FicError::InvalidStiffness(format!("x_b must be > 0, got {x_b}")));
        }
        if !(k_const >= 0.0 && k_const.is_finite()) {
            return Err(FicError::InvalidStiffness(format!("k_const must be >= 0, got {k_const}")));
        }
        let beta_sq = beta_squared(k_const, w_max, x_b).map_err(|_| {
            FicError::InvalidStiffness(format!(
                "w_max/x_b - k_const = {} must exceed 1",
                w_max / x_b - k_const
            ))
        })?;
        Ok(Self {
            k_const,
            w_max,
            x_b,
            beta_sq,
        })
    }

    pub fn k_const(&self) -> f64 {
        self.k_const
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn x_b(&self) -> f64 {
        self.x_b
    }

    pub fn beta_sq(&self) -> f64 {
        self.beta_sq
    }

    /// Peak stiffness, reached at the boundary.
    pub fn k_max(&self) -> f64 {
        self.w_max / self.x_b
    }

    /// Same spring with a different boundary (online boundary adjustment).
    pub fn with_boundary(&self, x_b: f64) -> Result<Self> {
        Self::new(self.k_const, self.w_max, x_b)
    }

    pub fn with_w_max(&self, w_max: f64) -> Result<Self> {
        Self::new(self.k_const, w_max, self.x_b)
    }

    pub fn stiffness(&self, x_err: f64) -> f64 {
        let a = x_err.abs();
        if a > self.x_b {
            self.w_max / a
        } else {
            self.k_const + (self.beta_sq * x_err * x_err).exp()
        }
    }

    pub fn spring_force(&self, x_err: f64) -> f64 {
        if x_err.abs() > self.x_b {
            self.w_max.copysign(x_err)
        } else {
            self.stiffness(x_err) * x_err
        }
    }

    /// Potential energy stored at `x_err`, the integral of the force from 0.
    pub fn spring_energy(&self, x_err: f64) -> f64 {
        let a = x_err.abs();
        if a <= self.x_b {
            self.inner_energy(a)
        } else {
            self.inner_energy(self.x_b) + self.w_max * (a - self.x_b)
        }
    }

    fn inner_energy(&self, a: f64) -> f64 {
        0.5 * self.k_const * a * a + (self.beta_sq * a * a).exp_m1() / (2.0 * self.beta_sq)
    }
}
