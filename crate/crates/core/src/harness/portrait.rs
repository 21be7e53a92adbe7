use serde::{Deserialize, Serialize};

use super::run::run_scenario;
use super::scenario::{PlantSpec, PointMassSpec, Reference, Scenario, StaticRef};
use crate::controllers::{ControllerConfig, FicConfig};
use crate::dynamics::Integrator;
use crate::error::{FicError, Result};
use crate::spring::StiffnessParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitCurve {
    pub energy: f64,
    /// +1 for the excursion towards positive error, -1 for the mirror.
    pub branch: i8,
    pub t: Vec<f64>,
    pub x_err: Vec<f64>,
    pub x_err_rate: Vec<f64>,
}

impl PortraitCurve {
    pub fn apex(&self) -> f64 {
        self.x_err.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
    }
}

/// Free undamped 1-DoF trajectories starting on target with kinetic energy
/// `energy`: one excursion out to the apex and back, for both signs.
pub fn phase_portrait(params: StiffnessParams, inertia: f64, energies: &[f64], dt: f64) -> Result<Vec<PortraitCurve>> {
    let mut curves = Vec::new();
    for &energy in energies {
        if !(energy > 0.0) {
            return Err(FicError::Precondition(format!("energy must be > 0, got {energy}")));
        }
        let speed = (2.0 * energy / inertia).sqrt();
        for branch in [1i8, -1] {
            // x̃ = -x, so a positive error rate needs a negative velocity.
            let v0 = -(branch as f64) * speed;
            let horizon = 4.0 * (2.0 * inertia * energy).sqrt() / params.w_max() + 20.0 * (inertia / params.k_max()).sqrt() + 0.5;
            let scenario = Scenario {
                name: format!("portrait E={energy}"),
                plant: PlantSpec::PointMass(PointMassSpec { inertia: vec![inertia], initial_pose: Some(vec![0.0]), initial_velocity: Some(vec![v0]) }),
                controller: ControllerConfig::Fic(FicConfig::new(vec![params])),
                reference: Reference::Static(StaticRef { pose: vec![0.0] }),
                perturbations: Default::default(),
                wall: None,
                boundary_schedule: None,
                dt,
                feedback_hz: 1.0 / dt,
                duration: horizon,
                integrator: Integrator::Rk4,
                seed: 0,
                record_every: 1,
            };
            let rec = run_scenario(&scenario).map_err(|e| FicError::Precondition(e.to_string()))?;
            if let Some(f) = rec.failure {
                return Err(FicError::Precondition(format!("portrait run failed at t = {}: {}", f.t, f.message)));
            }
            let mut curve = PortraitCurve { energy, branch, t: vec![], x_err: vec![], x_err_rate: vec![] };
            let mut seen_convergence = false;
            for r in &rec.rows {
                let e = r.x_err[0];
                if r.phase[0] == 0 {
                    seen_convergence = true;
                }
                // Closed once the error returns through the target.
                let closed = seen_convergence && (r.phase[0] == 1 || e * branch as f64 <= 0.0);
                curve.t.push(r.t);
                curve.x_err.push(e);
                curve.x_err_rate.push(-r.xdot[0]);
                if closed {
                    break;
                }
            }
            curves.push(curve);
        }
    }
    Ok(curves)
}
