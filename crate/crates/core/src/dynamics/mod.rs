//! Plants, integrators and environment models.

pub mod arm;
pub mod contact;
pub mod perturbation;
pub mod task_space;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FicError, Result};

pub use arm::{arm_dynamics, ArmDynamics, Link, PlanarArm};
pub use contact::{contact_force, ContactWall};
pub use perturbation::{external_wrench, PerturbationProfile, Pulse};
pub use task_space::{task_space_quantities, TaskSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    SemiImplicitEuler,
    #[default]
    Rk4,
}

/// Point mass with independent task DoF (identity Jacobian).
#[derive(Debug, Clone, PartialEq)]
pub struct PointMassPlant {
    pub inertia: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PointMassPlant {
    pub fn new(inertia: Vec<f64>, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if inertia.iter().any(|l| !(*l > 0.0)) {
            return Err(FicError::Precondition("point-mass inertia must be > 0".into()));
        }
        if x.len() != inertia.len() || v.len() != inertia.len() {
            return Err(FicError::Dimension("point-mass state and inertia lengths differ".into()));
        }
        Ok(PointMassPlant { inertia, x, v })
    }

    pub fn at_rest(inertia: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        let v = vec![0.0; inertia.len()];
        Self::new(inertia, x, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmPlant {
    pub arm: PlanarArm,
    pub q: [f64; arm::JOINTS],
    pub qd: [f64; arm::JOINTS],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    PointMass(PointMassPlant),
    Arm(ArmPlant),
}

/// Model terms the controller needs, evaluated at a (possibly held) state.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub mass: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
    pub jacobian_dot: DMatrix<f64>,
    pub coriolis_qd: DVector<f64>,
    pub gravity: DVector<f64>,
}

/// Joint-space snapshot of a plant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
}

impl Plant {
    pub fn task_dof(&self) -> usize {
        match self {
            Plant::PointMass(p) => p.inertia.len(),
            Plant::Arm(_) => 2,
        }
    }

    pub fn joint_dof(&self) -> usize {
        match self {
            Plant::PointMass(p) => p.inertia.len(),
            Plant::Arm(_) => arm::JOINTS,
        }
    }

    pub fn joint_state(&self) -> JointState {
        match self {
            Plant::PointMass(p) => JointState { q: p.x.clone(), qd: p.v.clone() },
            Plant::Arm(a) => JointState { q: a.q.to_vec(), qd: a.qd.to_vec() },
        }
    }

    pub fn task_pose_of(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Plant::PointMass(_) => q.to_vec(),
            Plant::Arm(a) => a.arm.end_effector(q).as_slice().to_vec(),
        }
    }

    pub fn task_velocity_of(&self, q: &[f64], qd: &[f64]) -> Vec<f64> {
        match self {
            Plant::PointMass(_) => qd.to_vec(),
            Plant::Arm(a) => a.arm.end_effector_velocity(q, qd).as_slice().to_vec(),
        }
    }

    pub fn task_pose(&self) -> Vec<f64> {
        let s = self.joint_state();
        self.task_pose_of(&s.q)
    }

    pub fn task_velocity(&self) -> Vec<f64> {
        let s = self.joint_state();
        self.task_velocity_of(&s.q, &s.qd)
    }

    pub fn model(&self, q: &[f64], qd: &[f64]) -> PlantModel {
        match self {
            Plant::PointMass(p) => {
                let n = p.inertia.len();
                PlantModel {
                    mass: DMatrix::from_diagonal(&DVector::from_column_slice(&p.inertia)),
                    jacobian: DMatrix::identity(n, n),
                    jacobian_dot: DMatrix::zeros(n, n),
                    coriolis_qd: DVector::zeros(n),
                    gravity: DVector::zeros(n),
                }
            }
            Plant::Arm(a) => {
                let d = a.arm.dynamics(q, qd);
                PlantModel {
                    mass: d.mass,
                    jacobian: d.jacobian,
                    jacobian_dot: d.jacobian_dot,
                    coriolis_qd: d.coriolis_qd,
                    gravity: d.gravity,
                }
            }
        }
    }

    /// Kinetic plus gravitational energy.
    pub fn mechanical_energy(&self) -> f64 {
        match self {
            Plant::PointMass(p) => p.inertia.iter().zip(&p.v).map(|(m, v)| 0.5 * m * v * v).sum(),
            Plant::Arm(a) => a.arm.kinetic_energy(&a.q, &a.qd) + a.arm.potential_energy(&a.q),
        }
    }

    fn acceleration(&self, q: &[f64], qd: &[f64], tau: &[f64], task_wrench: &[f64]) -> Vec<f64> {
        match self {
            Plant::PointMass(p) => (0..p.inertia.len())
                .map(|i| (tau[i] + task_wrench[i]) / p.inertia[i])
                .collect(),
            Plant::Arm(a) => {
                let (j, _) = a.arm.jacobian(q, qd);
                let ext = j.transpose() * nalgebra::Vector2::from_column_slice(task_wrench);
                let total: Vec<f64> = (0..arm::JOINTS).map(|i| tau[i] + ext[i]).collect();
                a.arm.forward_dynamics(q, qd, &total).as_slice().to_vec()
            }
        }
    }

    fn with_state(&self, q: &[f64], qd: &[f64]) -> Plant {
        match self {
            Plant::PointMass(p) => Plant::PointMass(PointMassPlant {
                inertia: p.inertia.clone(),
                x: q.to_vec(),
                v: qd.to_vec(),
            }),
            Plant::Arm(a) => Plant::Arm(ArmPlant {
                arm: a.arm.clone(),
                q: [q[0], q[1], q[2]],
                qd: [qd[0], qd[1], qd[2]],
            }),
        }
    }

    /// Advance one step under a held joint force and no environment.
    pub fn step(&self, tau: &[f64], dt: f64, integrator: Integrator) -> Result<Plant> {
        let dof = self.task_dof();
        self.step_with(tau, 0.0, dt, integrator, &|_, _, _| vec![0.0; dof])
    }

    /// Advance one step. `environment(t, pose, velocity)` returns the task
    /// wrench from contacts and perturbations; it is re-evaluated at every
    /// integrator stage.
    pub fn step_with(
        &self,
        tau: &[f64],
        t: f64,
        dt: f64,
        integrator: Integrator,
        environment: &dyn Fn(f64, &[f64], &[f64]) -> Vec<f64>,
    ) -> Result<Plant> {
        if !(dt > 0.0) {
            return Err(FicError::Precondition(format!("dt must be > 0, got {dt}")));
        }
        if tau.len() != self.joint_dof() {
            return Err(FicError::Dimension(format!(
                "joint force has {} entries, plant has {} joints",
                tau.len(),
                self.joint_dof()
            )));
        }
        let accel = |time: f64, q: &[f64], qd: &[f64]| -> Vec<f64> {
            let pose = self.task_pose_of(q);
            let vel = self.task_velocity_of(q, qd);
            let w = environment(time, &pose, &vel);
            self.acceleration(q, qd, tau, &w)
        };
        let s = self.joint_state();
        let (q, qd) = match integrator {
            Integrator::SemiImplicitEuler => {
                let a = accel(t, &s.q, &s.qd);
                let qd: Vec<f64> = s.qd.iter().zip(&a).map(|(v, a)| v + a * dt).collect();
                let q: Vec<f64> = s.q.iter().zip(&qd).map(|(x, v)| x + v * dt).collect();
                (q, qd)
            }
            Integrator::Rk4 => rk4(&s.q, &s.qd, t, dt, &accel),
        };
        if q.iter().chain(&qd).any(|v| !v.is_finite()) {
            return Err(FicError::Blowup { t: t + dt });
        }
        Ok(self.with_state(&q, &qd))
    }
}

fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

fn rk4(
    q: &[f64],
    qd: &[f64],
    t: f64,
    dt: f64,
    accel: &dyn Fn(f64, &[f64], &[f64]) -> Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let k1v = accel(t, q, qd);
    let k1x = qd.to_vec();
    let q2 = axpy(q, 0.5 * dt, &k1x);
    let v2 = axpy(qd, 0.5 * dt, &k1v);
    let k2v = accel(t + 0.5 * dt, &q2, &v2);
    let k2x = v2;
    let q3 = axpy(q, 0.5 * dt, &k2x);
    let v3 = axpy(qd, 0.5 * dt, &k2v);
    let k3v = accel(t + 0.5 * dt, &q3, &v3);
    let k3x = v3;
    let q4 = axpy(q, dt, &k3x);
    let v4 = axpy(qd, dt, &k3v);
    let k4v = accel(t + dt, &q4, &v4);
    let k4x = v4;
    let combine = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..y.len())
            .map(|i| y[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    (combine(q, &k1x, &k2x, &k3x, &k4x), combine(qd, &k1v, &k2v, &k3v, &k4v))
}

/// Free-function form of [`Plant::step`].
pub fn step_plant(plant: &Plant, tau: &[f64], dt: f64, integrator: Integrator) -> Result<Plant> {
    plant.step(tau, dt, integrator)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_rk4() {
        let mut plant = Plant::PointMass(PointMassPlant::at_rest(vec![1.0], vec![1.0]).unwrap());
        let dt: f64 = 1e-3;
        let target = std::f64::consts::FRAC_PI_2;
        let mut t = 0.0;
        while t < target - 1e-12 {
            let h = dt.min(target - t);
            plant = plant
                .step_with(&[0.0], t, h, Integrator::Rk4, &|_, x, _| vec![-x[0]])
                .unwrap();
            t += h;
        }
        let x = plant.task_pose()[0];
        assert!(x.abs() < 1e-6, "x(pi/2) = {x}");
    }

    #[test]
    fn equilibrium_is_preserved() {
        let p = Plant::PointMass(PointMassPlant::at_rest(vec![2.0, 3.0], vec![0.1, -0.2]).unwrap());
        for integ in [Integrator::Rk4, Integrator::SemiImplicitEuler] {
            assert_eq!(p.step(&[0.0, 0.0], 1e-3, integ).unwrap(), p);
        }
    }

    #[test]
    fn zero_dt_rejected() {
        let p = Plant::PointMass(PointMassPlant::at_rest(vec![1.0], vec![0.0]).unwrap());
        assert!(matches!(p.step(&[0.0], 0.0, Integrator::Rk4), Err(FicError::Precondition(_))));
    }

    #[test]
    fn blowup_is_reported_with_time() {
        let p = Plant::PointMass(PointMassPlant::at_rest(vec![1.0], vec![0.0]).unwrap());
        let err = p
            .step_with(&[0.0], 2.0, 0.5, Integrator::Rk4, &|_, _, _| vec![f64::INFINITY])
            .unwrap_err();
        assert_eq!(err, FicError::Blowup { t: 2.5 });
    }

    #[test]
    fn unforced_arm_conserves_energy() {
        let arm = PlanarArm { gravity: [0.0, 0.0], ..PlanarArm::default() };
        let mut plant = Plant::Arm(ArmPlant {
            arm,
            q: [0.3, 0.8, -0.5],
            qd: [0.5, -0.4, 0.9],
        });
        let e0 = plant.mechanical_energy();
        let dt = 1e-4;
        for _ in 0..100_000 {
            plant = plant.step(&[0.0; 3], dt, Integrator::Rk4).unwrap();
        }
        let drift = (plant.mechanical_energy() - e0).abs() / e0;
        assert!(drift < 1e-6, "relative drift {drift}");
    }
}
