//! Divergence/convergence phase machine of the fractal attractor.
//!
//! While the error grows the DoF uses the nonlinear spring. At the apex the
//! stored energy `E_in` is reassigned to a linear spring of stiffness
//! `k' = 4 E_in / x_max^2` centred on the midpoint `x_max / 2`: half of the
//! energy accelerates the error towards the target, the other half brakes it,
//! so the ideal undamped trajectory lands on the target at rest.

use serde::{Deserialize, Serialize};

use crate::error::{FicError, Result};
use crate::spring::StiffnessParams;

/// Error rates below this magnitude count as zero (sampled switch detection).
pub const RATE_EPS: f64 = 1e-6;
/// Switches at smaller displacements are ignored: no energy, no force.
pub const ZERO_DISPLACEMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Divergence,
    Convergence,
}

impl Phase {
    /// Switch value `s`: 1 while diverging, 0 while converging.
    pub fn switch_value(self) -> u8 {
        match self {
            Phase::Divergence => 1,
            Phase::Convergence => 0,
        }
    }
}

/// `x_err_rate` is the time derivative of the error `x_d - x`.
pub fn classify_phase(x_err: f64, x_err_rate: f64) -> Phase {
    if x_err_rate.abs() < RATE_EPS || sign(x_err) == sign(x_err_rate) {
        Phase::Divergence
    } else {
        Phase::Convergence
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttractorState {
    pub phase: Phase,
    /// Signed error recorded at the last divergence -> convergence switch.
    pub x_tilde_max: f64,
    /// Spring energy stored at that switch.
    pub e_in: f64,
    pub k_prime_total: f64,
    /// Saturation of the convergence force: `w_max` at the switch.
    #[serde(default)]
    pub force_limit: f64,
}

impl AttractorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn x_tilde_mid(&self) -> f64 {
        0.5 * self.x_tilde_max
    }

    /// Advance the phase machine with the current sample.
    pub fn update(&self, params: &StiffnessParams, x_err: f64, x_err_rate: f64) -> Self {
        let next = classify_phase(x_err, x_err_rate);
        match (self.phase, next) {
            (Phase::Divergence, Phase::Convergence) => {
                if x_err.abs() < ZERO_DISPLACEMENT_EPS {
                    return *self;
                }
                let e_in = params.spring_energy(x_err);
                AttractorState {
                    phase: Phase::Convergence,
                    x_tilde_max: x_err,
                    e_in,
                    k_prime_total: 4.0 * e_in / (x_err * x_err),
                    force_limit: params.w_max(),
                }
            }
            (Phase::Convergence, Phase::Divergence) => AttractorState::new(),
            // A sample past the recorded apex can only come from an outward
            // push between samples; the error is growing again. A sample on
            // the far side of the target ends the segment as well.
            (Phase::Convergence, Phase::Convergence)
                if x_err.abs() > self.x_tilde_max.abs() || x_err * self.x_tilde_max < 0.0 =>
            {
                AttractorState::new()
            }
            _ => *self,
        }
    }

    /// Linear spring of stiffness `k'` centred on the midpoint.
    pub fn convergence_force(&self, x_err: f64) -> Result<f64> {
        if self.phase != Phase::Convergence {
            return Err(FicError::Contract("convergence force requested outside the convergence phase".into()));
        }
        if x_err * self.x_tilde_max < 0.0 || x_err.abs() > self.x_tilde_max.abs() {
            return Err(FicError::Contract(format!(
                "error {x_err} lies outside [0, {}]; re-classify before evaluating",
                self.x_tilde_max
            )));
        }
        Ok(self.convergence_force_unchecked(x_err))
    }

    /// Midpoint spring, clipped at `force_limit`. The clip is odd about the
    /// midpoint, so the work released before it still equals the work
    /// absorbed after it and the error still arrives at the target at rest.
    fn convergence_force_unchecked(&self, x_err: f64) -> f64 {
        let f = self.k_prime_total * (x_err - self.x_tilde_mid());
        if self.force_limit > 0.0 {
            f.clamp(-self.force_limit, self.force_limit)
        } else {
            f
        }
    }

    /// Potential of the (clipped) midpoint spring, zero at the midpoint.
    pub fn convergence_potential(&self, x_err: f64) -> f64 {
        let d = (x_err - self.x_tilde_mid()).abs();
        let k = self.k_prime_total;
        let lim = self.force_limit;
        if lim > 0.0 && k * d > lim {
            lim * d - 0.5 * lim * lim / k
        } else {
            0.5 * k * d * d
        }
    }

    /// Apparent convergence stiffness `force / x_err`; `None` near the target,
    /// where it diverges.
    pub fn convergence_stiffness(&self, x_err: f64) -> Option<f64> {
        (self.phase == Phase::Convergence && x_err.abs() > ZERO_DISPLACEMENT_EPS)
            .then(|| self.convergence_force_unchecked(x_err) / x_err)
    }

    /// Spring-path wrench for this DoF. Expects `update` to have run on the
    /// same sample.
    pub fn wrench(&self, params: &StiffnessParams, x_err: f64) -> f64 {
        match self.phase {
            Phase::Divergence => params.spring_force(x_err),
            Phase::Convergence => self.convergence_force_unchecked(x_err),
        }
    }
}

/// Free-function form of [`AttractorState::update`].
pub fn update_attractor(state: &AttractorState, params: &StiffnessParams, x_err: f64, x_err_rate: f64) -> AttractorState {
    state.update(params, x_err, x_err_rate)
}

/// Dispatches on the phase: nonlinear spring or midpoint spring.
pub fn fic_wrench(state: &AttractorState, params: &StiffnessParams, x_err: f64) -> f64 {
    state.wrench(params, x_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p0() -> StiffnessParams {
        StiffnessParams::new(0.0, 30.0, 0.05).unwrap()
    }

    fn converging() -> AttractorState {
        AttractorState::new().update(&p0(), 0.05, -0.01)
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_phase(0.02, 0.1), Phase::Divergence);
        assert_eq!(classify_phase(0.02, -0.1), Phase::Convergence);
        assert_eq!(classify_phase(0.02, 0.0), Phase::Divergence);
    }

    #[test]
    fn quadrant_partition() {
        assert_eq!(classify_phase(0.1, 0.2), Phase::Divergence);
        assert_eq!(classify_phase(-0.1, -0.2), Phase::Divergence);
        assert_eq!(classify_phase(-0.1, 0.2), Phase::Convergence);
        assert_eq!(classify_phase(0.1, -0.2), Phase::Convergence);
        assert_eq!(classify_phase(0.1, -0.5 * RATE_EPS), Phase::Divergence);
    }

    #[test]
    fn divergence_to_convergence_records_apex() {
        let s = converging();
        assert_eq!(s.phase, Phase::Convergence);
        assert_eq!(s.x_tilde_max, 0.05);
        assert_relative_eq!(s.e_in, 0.11704834043148477, max_relative = 1e-12);
        assert_relative_eq!(s.k_prime_total, 187.27734469037563, max_relative = 1e-12);
    }

    #[test]
    fn reentering_divergence_clears_record() {
        let s = converging().update(&p0(), 0.04, 0.02);
        assert_eq!(s, AttractorState::new());
    }

    #[test]
    fn no_transition_keeps_state() {
        let s = AttractorState::new().update(&p0(), 0.05, 0.01);
        assert_eq!(s, AttractorState::new());
        let c = converging();
        assert_eq!(c.update(&p0(), 0.03, -0.2), c);
    }

    #[test]
    fn zero_displacement_switch_is_skipped() {
        let s = AttractorState::new().update(&p0(), 1e-12, -0.5);
        assert_eq!(s.phase, Phase::Divergence);
    }

    #[test]
    fn overshooting_apex_reenters_divergence() {
        let s = converging().update(&p0(), 0.051, -0.01);
        assert_eq!(s.phase, Phase::Divergence);
    }

    #[test]
    fn convergence_force_examples() {
        let s = converging();
        assert_relative_eq!(s.convergence_force(0.025).unwrap(), 0.0);
        assert_relative_eq!(s.convergence_force(0.05).unwrap(), 4.681933617259391, max_relative = 1e-12);
        assert_relative_eq!(s.convergence_force(0.0).unwrap(), -4.681933617259391, max_relative = 1e-12);
        assert!(s.convergence_force(0.06).is_err());
        assert!(s.convergence_force(-0.01).is_err());
        assert!(AttractorState::new().convergence_force(0.01).is_err());
    }

    #[test]
    fn convergence_force_magnitude_is_bounded_by_midpoint_force() {
        let s = converging();
        let bound = s.k_prime_total * s.x_tilde_mid().abs();
        for i in 0..=100 {
            let x = 0.05 * i as f64 / 100.0;
            assert!(s.convergence_force(x).unwrap().abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn deep_apex_convergence_force_saturates() {
        // Far past the boundary 2 E_in / x̃_max exceeds w_max.
        let s = AttractorState::new().update(&p0(), 0.2, -0.01);
        assert!(s.k_prime_total * s.x_tilde_mid() > 30.0);
        assert_eq!(s.convergence_force(0.2).unwrap(), 30.0);
        assert_eq!(s.convergence_force(0.0).unwrap(), -30.0);
        assert_eq!(s.convergence_force(0.1).unwrap(), 0.0);
        // Antisymmetric about the midpoint.
        assert_relative_eq!(s.convergence_force(0.1 + 0.003).unwrap(), -s.convergence_force(0.1 - 0.003).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(s.convergence_potential(0.2), s.convergence_potential(0.0), max_relative = 1e-12);
    }

    #[test]
    fn crossing_the_target_ends_convergence() {
        let s = converging().update(&p0(), -0.01, 0.3);
        assert_eq!(s, AttractorState::new());
    }

    #[test]
    fn convergence_stiffness_guard() {
        let s = converging();
        assert!(s.convergence_stiffness(0.0).is_none());
        assert_relative_eq!(s.convergence_stiffness(0.05).unwrap(), s.k_prime_total * 0.5);
        assert!(AttractorState::new().convergence_stiffness(0.05).is_none());
    }

    #[test]
    fn wrench_dispatch() {
        let lin = StiffnessParams::new(150.0, 30.0, 0.05).unwrap();
        assert_eq!(fic_wrench(&AttractorState::new(), &lin, 0.1), 30.0);
        assert_eq!(fic_wrench(&AttractorState::new(), &lin, 0.0), 0.0);
        assert_relative_eq!(fic_wrench(&converging(), &p0(), 0.025), 0.0);
    }

    #[test]
    fn negative_side_mirrors() {
        let s = AttractorState::new().update(&p0(), -0.05, 0.01);
        assert_eq!(s.phase, Phase::Convergence);
        assert_relative_eq!(s.convergence_force(-0.05).unwrap(), -4.681933617259391, max_relative = 1e-12);
        assert_relative_eq!(s.convergence_force(0.0).unwrap(), 4.681933617259391, max_relative = 1e-12);
    }
}
