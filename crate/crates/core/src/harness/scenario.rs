use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::ControllerConfig;
use crate::dynamics::{arm::JOINTS, ArmPlant, ContactWall, Integrator, PerturbationProfile, PlanarArm, Plant, PointMassPlant, Pulse};

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_FEEDBACK_HZ: f64 = 1000.0;
pub const DEFAULT_RECORD_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMassSpec {
    pub inertia: Vec<f64>,
    /// Defaults to the reference at t = 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pose: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocity: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    #[serde(default)]
    pub arm: PlanarArm,
    pub q0: [f64; JOINTS],
    #[serde(default)]
    pub qd0: [f64; JOINTS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlantSpec {
    PointMass(PointMassSpec),
    Arm(ArmSpec),
}

impl PlantSpec {
    pub fn task_dof(&self) -> usize {
        match self {
            PlantSpec::PointMass(p) => p.inertia.len(),
            PlantSpec::Arm(_) => 2,
        }
    }

    pub fn joint_dof(&self) -> usize {
        match self {
            PlantSpec::PointMass(p) => p.inertia.len(),
            PlantSpec::Arm(_) => JOINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticRef {
    pub pose: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidRef {
    pub center: Vec<f64>,
    pub axis: usize,
    pub amplitude: f64,
    pub period: f64,
}

/// Starts at `center + radius * e_plane[0]` and runs counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleRef {
    pub center: Vec<f64>,
    pub plane: [usize; 2],
    pub radius: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reference {
    Static(StaticRef),
    Sinusoid(SinusoidRef),
    Circle(CircleRef),
}

impl Reference {
    pub fn dof(&self) -> usize {
        match self {
            Reference::Static(r) => r.pose.len(),
            Reference::Sinusoid(SinusoidRef { center, .. }) | Reference::Circle(CircleRef { center, .. }) => center.len(),
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        match self {
            Reference::Static(r) => r.pose.clone(),
            Reference::Sinusoid(SinusoidRef { center, axis, amplitude, period }) => {
                let mut p = center.clone();
                p[*axis] += amplitude * (TAU * t / period).sin();
                p
            }
            Reference::Circle(CircleRef { center, plane, radius, period }) => {
                let mut p = center.clone();
                let phase = TAU * t / period;
                p[plane[0]] += radius * phase.cos();
                p[plane[1]] += radius * phase.sin();
                p
            }
        }
    }

    pub fn validate(&self, dof: usize) -> Result<(), String> {
        if self.dof() != dof {
            return Err(format!("reference has {} DoF, plant has {dof}", self.dof()));
        }
        match self {
            Reference::Static(_) => Ok(()),
            Reference::Sinusoid(SinusoidRef { axis, period, .. }) => {
                if *axis >= dof {
                    Err(format!("sinusoid axis {axis} out of range"))
                } else if !(*period > 0.0) {
                    Err("sinusoid period must be > 0".into())
                } else {
                    Ok(())
                }
            }
            Reference::Circle(CircleRef { plane, period, radius, .. }) => {
                if plane[0] >= dof || plane[1] >= dof || plane[0] == plane[1] {
                    Err(format!("circle plane {plane:?} invalid for {dof} DoF"))
                } else if !(*period > 0.0 && *radius >= 0.0) {
                    Err("circle needs period > 0 and radius >= 0".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Randomised pulse train expanded from the scenario seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPulses {
    pub count: usize,
    /// Start of the first pulse (s).
    pub first_start: f64,
    /// Time between consecutive pulse starts (s).
    pub spacing: f64,
    /// Magnitude range (N or N·m), sign drawn at random.
    pub magnitude: [f64; 2],
    pub duration: [f64; 2],
    /// DoF the pulses may act on; all DoF when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dofs: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pulses: Vec<Pulse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomPulses>,
}

impl PerturbationSpec {
    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty() && self.random.is_none()
    }

    pub fn expand(&self, dof: usize, seed: u64) -> PerturbationProfile {
        let mut pulses = self.pulses.clone();
        if let Some(r) = &self.random {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dofs: Vec<usize> = r.dofs.clone().unwrap_or_else(|| (0..dof).collect());
            for k in 0..r.count {
                let axis = dofs[rng.random_range(0..dofs.len())];
                let mag = lerp(r.magnitude, rng.random::<f64>());
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let duration = lerp(r.duration, rng.random::<f64>());
                let mut wrench = vec![0.0; dof];
                wrench[axis] = sign * mag;
                pulses.push(Pulse {
                    start: r.first_start + k as f64 * r.spacing,
                    duration,
                    wrench,
                });
            }
        }
        pulses.sort_by(|a, b| a.start.total_cmp(&b.start));
        PerturbationProfile::new(pulses)
    }
}

fn lerp(range: [f64; 2], u: f64) -> f64 {
    range[0] + (range[1] - range[0]) * u
}

/// Stepwise shrink of the virtual boundary of selected DoF:
/// `x_b(t) = max(floor, start - step * floor(t / interval))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySchedule {
    pub dofs: Vec<usize>,
    pub start: f64,
    pub floor: f64,
    /// Boundary decrement per interval.
    pub step: f64,
    pub interval: f64,
}

impl BoundarySchedule {
    pub fn boundary_at(&self, t: f64) -> f64 {
        let n = (t / self.interval).floor();
        (self.start - n * self.step).max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub plant: PlantSpec,
    pub controller: ControllerConfig,
    pub reference: Reference,
    #[serde(default, skip_serializing_if = "PerturbationSpec::is_empty")]
    pub perturbations: PerturbationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<ContactWall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_schedule: Option<BoundarySchedule>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_feedback_hz")]
    pub feedback_hz: f64,
    pub duration: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub seed: u64,
    /// Record one row every this many physics steps.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_feedback_hz() -> f64 {
    DEFAULT_FEEDBACK_HZ
}

fn default_record_every() -> usize {
    DEFAULT_RECORD_EVERY
}

impl Scenario {
    /// Checks every cross-field invariant; the message names the field.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let dof = self.plant.task_dof();
        let field = |f: &str, e: String| (f.to_string(), e);
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(field("/dt", "dt must be > 0".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(field("/duration", "duration must be > 0".into()));
        }
        if !(self.feedback_hz > 0.0) || self.feedback_hz * self.dt > 1.0 + 1e-9 {
            return Err(field(
                "/feedback_hz",
                format!("feedback rate {} Hz must be > 0 and <= 1/dt = {} Hz", self.feedback_hz, 1.0 / self.dt),
            ));
        }
        if self.record_every == 0 {
            return Err(field("/record_every", "record_every must be >= 1".into()));
        }
        match &self.plant {
            PlantSpec::PointMass(PointMassSpec { inertia, initial_pose, initial_velocity }) => {
                if inertia.is_empty() || inertia.iter().any(|l| !(*l > 0.0)) {
                    return Err(field("/plant/inertia", "inertia entries must be > 0".into()));
                }
                if initial_pose.as_ref().is_some_and(|p| p.len() != dof) {
                    return Err(field("/plant/initial_pose", "length must match inertia".into()));
                }
                if initial_velocity.as_ref().is_some_and(|p| p.len() != dof) {
                    return Err(field("/plant/initial_velocity", "length must match inertia".into()));
                }
            }
            PlantSpec::Arm(ArmSpec { arm, .. }) => arm.validate().map_err(|e| field("/plant/arm", e))?,
        }
        self.controller.validate(dof).map_err(|e| field("/controller", e))?;
        if let Some(n) = self.controller.null_space() {
            let joints = self.plant.joint_dof();
            if n.posture.len() != joints {
                return Err(field("/controller/null_space/posture", format!("posture needs {joints} entries")));
            }
        }
        self.reference.validate(dof).map_err(|e| field("/reference", e))?;
        if let Some(w) = &self.wall {
            w.validate().map_err(|e| field("/wall", e))?;
            if w.axis >= dof {
                return Err(field("/wall/axis", format!("axis {} out of range", w.axis)));
            }
        }
        if let Some(r) = &self.perturbations.random {
            if r.dofs.as_ref().is_some_and(|d| d.is_empty() || d.iter().any(|i| *i >= dof)) {
                return Err(field("/perturbations/random/dofs", "DoF index out of range".into()));
            }
            if !(r.spacing > 0.0 && r.magnitude[0] <= r.magnitude[1] && r.duration[0] > 0.0 && r.duration[0] <= r.duration[1]) {
                return Err(field("/perturbations/random", "invalid ranges".into()));
            }
        }
        self.perturbations
            .expand(dof, self.seed)
            .validate(dof)
            .map_err(|e| field("/perturbations", e))?;
        if let Some(s) = &self.boundary_schedule {
            if !matches!(self.controller, ControllerConfig::Fic(_)) {
                return Err(field("/boundary_schedule", "only applies to the fic controller".into()));
            }
            if s.dofs.iter().any(|i| *i >= dof) || !(s.floor > 0.0 && s.start >= s.floor && s.interval > 0.0 && s.step >= 0.0) {
                return Err(field("/boundary_schedule", "invalid schedule".into()));
            }
        }
        Ok(())
    }

    pub fn build_plant(&self) -> Result<Plant, String> {
        match &self.plant {
            PlantSpec::PointMass(PointMassSpec { inertia, initial_pose, initial_velocity }) => {
                let x = initial_pose.clone().unwrap_or_else(|| self.reference.at(0.0));
                let v = initial_velocity.clone().unwrap_or_else(|| vec![0.0; inertia.len()]);
                PointMassPlant::new(inertia.clone(), x, v)
                    .map(Plant::PointMass)
                    .map_err(|e| e.to_string())
            }
            PlantSpec::Arm(ArmSpec { arm, q0, qd0 }) => Ok(Plant::Arm(ArmPlant { arm: arm.clone(), q: *q0, qd: *qd0 })),
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}
