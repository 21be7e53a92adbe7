//! Task-space controllers mapped to joint torques.
//!
//! Both controllers share the same torque assembly:
//! `τ = Jᵀ (W + Λ (J M⁻¹ C q̇ − J̇ q̇)) + G + (I − Jᵀ J̄ᵀ) τ_null`.
//! Gravity is added in joint space after the `Jᵀ` map.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::attractor::{AttractorState, Phase};
use crate::dynamics::{JointState, Plant, PlantModel, TaskSpace};
use crate::error::{FicError, Result};
use crate::spring::StiffnessParams;

/// Joint-space PD toward a posture, projected into the null space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullSpaceGains {
    pub posture: Vec<f64>,
    pub kp: f64,
    #[serde(default)]
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FicConfig {
    pub stiffness: Vec<StiffnessParams>,
    /// Passive damping per DoF, acting on measured velocity.
    #[serde(default)]
    pub damping: Vec<f64>,
    #[serde(default)]
    pub null_space: Option<NullSpaceGains>,
    /// `false` pins every DoF in the divergence phase (plain nonlinear spring).
    #[serde(default = "yes")]
    pub attractor: bool,
}

fn yes() -> bool {
    true
}

impl FicConfig {
    pub fn new(stiffness: Vec<StiffnessParams>) -> Self {
        FicConfig {
            stiffness,
            damping: Vec::new(),
            null_space: None,
            attractor: true,
        }
    }

    pub fn dof(&self) -> usize {
        self.stiffness.len()
    }

    pub fn damping_at(&self, i: usize) -> f64 {
        self.damping.get(i).copied().unwrap_or(0.0)
    }

    pub fn validate(&self, dof: usize) -> std::result::Result<(), String> {
        if self.stiffness.len() != dof {
            return Err(format!("{} stiffness entries for {dof} task DoF", self.stiffness.len()));
        }
        if !self.damping.is_empty() && self.damping.len() != dof {
            return Err(format!("{} damping entries for {dof} task DoF", self.damping.len()));
        }
        if self.damping.iter().any(|d| !(*d >= 0.0)) {
            return Err("damping must be >= 0".into());
        }
        validate_null(&self.null_space)
    }
}

/// Constant-gain impedance controller. `inertia` is the `k_D` term used when
/// auditing its work; it is not fed back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub stiffness: Vec<f64>,
    #[serde(default)]
    pub damping: Vec<f64>,
    #[serde(default)]
    pub inertia: Option<f64>,
    #[serde(default)]
    pub null_space: Option<NullSpaceGains>,
}

impl BaselineConfig {
    pub fn validate(&self, dof: usize) -> std::result::Result<(), String> {
        if self.stiffness.len() != dof {
            return Err(format!("{} stiffness entries for {dof} task DoF", self.stiffness.len()));
        }
        if self.stiffness.iter().any(|k| !(*k > 0.0)) {
            return Err("baseline stiffness must be > 0".into());
        }
        if !self.damping.is_empty() && self.damping.len() != dof {
            return Err(format!("{} damping entries for {dof} task DoF", self.damping.len()));
        }
        if self.damping.iter().any(|d| !(*d >= 0.0)) {
            return Err("damping must be >= 0".into());
        }
        validate_null(&self.null_space)
    }
}

fn validate_null(null: &Option<NullSpaceGains>) -> std::result::Result<(), String> {
    match null {
        Some(n) if !(n.kp >= 0.0 && n.kd >= 0.0) => Err("null-space gains must be >= 0".into()),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerConfig {
    Fic(FicConfig),
    Baseline(BaselineConfig),
}

impl ControllerConfig {
    pub fn validate(&self, dof: usize) -> std::result::Result<(), String> {
        match self {
            ControllerConfig::Fic(c) => c.validate(dof),
            ControllerConfig::Baseline(c) => c.validate(dof),
        }
    }

    pub fn null_space(&self) -> Option<&NullSpaceGains> {
        match self {
            ControllerConfig::Fic(c) => c.null_space.as_ref(),
            ControllerConfig::Baseline(c) => c.null_space.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub torques: DVector<f64>,
    /// Task wrench per DoF before dynamics compensation (spring + damping).
    pub wrench: Vec<f64>,
    /// Spring-path component only.
    pub spring_wrench: Vec<f64>,
    pub attractors: Vec<AttractorState>,
    pub x_err: Vec<f64>,
    pub x_err_rate: Vec<f64>,
    pub task_space: TaskSpace,
}

pub fn null_space_torque(q: &[f64], qd: &[f64], gains: &NullSpaceGains) -> Vec<f64> {
    q.iter()
        .zip(qd)
        .zip(&gains.posture)
        .map(|((q, qd), target)| gains.kp * (target - q) - gains.kd * qd)
        .collect()
}

/// `K x̃ + D x̃̇` with constant gains.
pub fn baseline_impedance_wrench(x_err: &[f64], x_err_rate: &[f64], config: &BaselineConfig) -> Vec<f64> {
    x_err
        .iter()
        .zip(x_err_rate)
        .enumerate()
        .map(|(i, (e, r))| config.stiffness[i] * e + config.damping.get(i).copied().unwrap_or(0.0) * r)
        .collect()
}

/// Task errors with a static-reference convention: `x̃ = x_d − x`, `x̃̇ = −ẋ`.
pub fn task_errors(plant: &Plant, measured: &JointState, target: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pose = plant.task_pose_of(&measured.q);
    let vel = plant.task_velocity_of(&measured.q, &measured.qd);
    let x_err = target.iter().zip(&pose).map(|(d, x)| d - x).collect();
    let rate = vel.iter().map(|v| -v).collect();
    (x_err, rate)
}

fn assemble_torques(
    model: &PlantModel,
    ts: &TaskSpace,
    wrench: &[f64],
    measured: &JointState,
    null: Option<&NullSpaceGains>,
) -> DVector<f64> {
    let qd = DVector::from_column_slice(&measured.qd);
    let compensation = &ts.lambda * (&model.jacobian * &ts.m_inv * &model.coriolis_qd - &model.jacobian_dot * &qd);
    let w = DVector::from_column_slice(wrench) + compensation;
    let mut tau = model.jacobian.transpose() * w + &model.gravity;
    if let Some(gains) = null {
        let raw = DVector::from_vec(null_space_torque(&measured.q, &measured.qd, gains));
        tau += ts.project_null(&raw);
    }
    tau
}

fn check_dims(plant: &Plant, target: &[f64], n: usize) -> Result<()> {
    if target.len() != plant.task_dof() || n != plant.task_dof() {
        return Err(FicError::Dimension(format!(
            "plant has {} task DoF, target {} and controller {}",
            plant.task_dof(),
            target.len(),
            n
        )));
    }
    Ok(())
}

/// One control tick of the fractal impedance controller. Updates the
/// attractor of each DoF with the current error, then builds joint torques.
pub fn fic_control_torques(
    plant: &Plant,
    measured: &JointState,
    target: &[f64],
    attractors: &[AttractorState],
    config: &FicConfig,
) -> Result<ControlOutput> {
    check_dims(plant, target, config.dof())?;
    if attractors.len() != config.dof() {
        return Err(FicError::Dimension("one attractor state per task DoF required".into()));
    }
    let (x_err, rate) = task_errors(plant, measured, target);
    let attractors: Vec<AttractorState> = attractors
        .iter()
        .zip(&config.stiffness)
        .enumerate()
        .map(|(i, (a, p))| {
            if config.attractor {
                a.update(p, x_err[i], rate[i])
            } else {
                AttractorState { phase: Phase::Divergence, ..AttractorState::new() }
            }
        })
        .collect();
    let spring_wrench: Vec<f64> = (0..config.dof())
        .map(|i| attractors[i].wrench(&config.stiffness[i], x_err[i]))
        .collect();
    let wrench: Vec<f64> = (0..config.dof())
        .map(|i| spring_wrench[i] + config.damping_at(i) * rate[i])
        .collect();
    let model = plant.model(&measured.q, &measured.qd);
    let ts = TaskSpace::compute(&model.jacobian, &model.mass)?;
    let torques = assemble_torques(&model, &ts, &wrench, measured, config.null_space.as_ref());
    Ok(ControlOutput {
        torques,
        wrench,
        spring_wrench,
        attractors,
        x_err,
        x_err_rate: rate,
        task_space: ts,
    })
}

/// Baseline counterpart of [`fic_control_torques`]; attractor states are
/// passed through untouched.
pub fn baseline_control_torques(
    plant: &Plant,
    measured: &JointState,
    target: &[f64],
    attractors: &[AttractorState],
    config: &BaselineConfig,
) -> Result<ControlOutput> {
    check_dims(plant, target, config.stiffness.len())?;
    let (x_err, rate) = task_errors(plant, measured, target);
    let spring_wrench: Vec<f64> = x_err.iter().zip(&config.stiffness).map(|(e, k)| k * e).collect();
    let wrench = baseline_impedance_wrench(&x_err, &rate, config);
    let model = plant.model(&measured.q, &measured.qd);
    let ts = TaskSpace::compute(&model.jacobian, &model.mass)?;
    let torques = assemble_torques(&model, &ts, &wrench, measured, config.null_space.as_ref());
    Ok(ControlOutput {
        torques,
        wrench,
        spring_wrench,
        attractors: attractors.to_vec(),
        x_err,
        x_err_rate: rate,
        task_space: ts,
    })
}

pub fn control_torques(
    plant: &Plant,
    measured: &JointState,
    target: &[f64],
    attractors: &[AttractorState],
    config: &ControllerConfig,
) -> Result<ControlOutput> {
    match config {
        ControllerConfig::Fic(c) => fic_control_torques(plant, measured, target, attractors, c),
        ControllerConfig::Baseline(c) => baseline_control_torques(plant, measured, target, attractors, c),
    }
}
