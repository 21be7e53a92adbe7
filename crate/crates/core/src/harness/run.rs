use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::scenario::{Reference, Scenario};
use super::zoh::HoldSchedule;
use crate::attractor::{classify_phase, AttractorState, Phase};
use crate::controllers::{control_torques, ControllerConfig, ControlOutput};
use crate::dynamics::{PerturbationProfile, Plant, Pulse};
use crate::energy::{dof_kinetic, EnergyLedger, SwitchOffsets, LedgerSummary, LyapunovMonitor, LyapunovReport, LYAPUNOV_STEP_TOL};
use crate::error::FicError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub t: f64,
    pub x_d: Vec<f64>,
    pub x: Vec<f64>,
    pub x_err: Vec<f64>,
    pub xdot: Vec<f64>,
    pub phase: Vec<u8>,
    pub wrench: Vec<f64>,
    /// Contact force along the wall axis (0 without a wall).
    pub contact_f: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub e_in_cum: f64,
    pub e_rel_cum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub t: f64,
    pub kind: String,
    pub message: String,
}

impl RunFailure {
    fn new(t: f64, e: &FicError) -> Self {
        let kind = match e {
            FicError::Singular { .. } => "singular",
            FicError::Blowup { .. } => "blowup",
            FicError::Dimension(_) => "dimension",
            FicError::Contract(_) => "contract",
            _ => "runtime",
        };
        RunFailure { t, kind: kind.into(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub name: String,
    pub dof: usize,
    pub rows: Vec<RecordRow>,
    /// Perturbation pulses actually applied (random ones expanded).
    pub pulses: Vec<Pulse>,
    pub ledger: LedgerSummary,
    pub lyapunov: LyapunovReport,
    /// Set when the run stopped early; `rows` then holds the partial record.
    pub failure: Option<RunFailure>,
}

impl EpisodeRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, f: impl Fn(&RecordRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid scenario at {pointer}: {message}")]
pub struct ScenarioError {
    pub pointer: String,
    pub message: String,
}

fn kinetic(lambda: &DMatrix<f64>, xdot: &[f64]) -> f64 {
    let v = DVector::from_column_slice(xdot);
    0.5 * v.dot(&(lambda * &v))
}

fn spring_energy(config: &ControllerConfig, i: usize, x: f64) -> f64 {
    match config {
        ControllerConfig::Fic(c) => c.stiffness[i].spring_energy(x),
        ControllerConfig::Baseline(c) => 0.5 * c.stiffness[i] * x * x,
    }
}

/// Controller parameters in force at time `t` (boundary schedule applied).
fn config_at(scenario: &Scenario, t: f64) -> Result<ControllerConfig, FicError> {
    let mut config = scenario.controller.clone();
    if let (Some(s), ControllerConfig::Fic(c)) = (&scenario.boundary_schedule, &mut config) {
        let xb = s.boundary_at(t);
        for &i in &s.dofs {
            c.stiffness[i] = c.stiffness[i].with_boundary(xb)?;
        }
    }
    Ok(config)
}

struct Loop<'a> {
    scenario: &'a Scenario,
    dof: usize,
    profile: PerturbationProfile,
    plant: Plant,
    attractors: Vec<AttractorState>,
    held_tau: Vec<f64>,
    last: Option<ControlOutput>,
    last_v: f64,
    prev_err: Option<Vec<f64>>,
    ledger: EnergyLedger,
    monitor: LyapunovMonitor,
    offsets: SwitchOffsets,
    forced: bool,
    rows: Vec<RecordRow>,
}

impl<'a> Loop<'a> {
    fn environment(&self, t: f64, pose: &[f64], vel: &[f64]) -> Vec<f64> {
        let mut w = self.profile.wrench_at(t, self.dof);
        if let Some(wall) = &self.scenario.wall {
            w[wall.axis] += wall.force(pose[wall.axis], vel[wall.axis]);
        }
        w
    }

    fn contact_now(&self) -> f64 {
        match &self.scenario.wall {
            Some(wall) => {
                let x = self.plant.task_pose();
                let v = self.plant.task_velocity();
                wall.force(x[wall.axis], v[wall.axis])
            }
            None => 0.0,
        }
    }

    fn tick(&mut self, t: f64) -> Result<(), FicError> {
        let config = config_at(self.scenario, t)?;
        let target = self.scenario.reference.at(t);
        let measured = self.plant.joint_state();
        let out = control_torques(&self.plant, &measured, &target, &self.attractors, &config)?;
        let xdot: Vec<f64> = out.x_err_rate.iter().map(|r| -r).collect();
        let lambda = &out.task_space.lambda;

        let phases: Vec<Phase> = match &config {
            ControllerConfig::Fic(_) => out.attractors.iter().map(|a| a.phase).collect(),
            ControllerConfig::Baseline(_) => out
                .x_err
                .iter()
                .zip(&out.x_err_rate)
                .map(|(e, r)| classify_phase(*e, *r))
                .collect(),
        };
        let e_now: Vec<f64> = (0..self.dof).map(|i| spring_energy(&config, i, out.x_err[i])).collect();
        let e_prev: Vec<f64> = match &self.prev_err {
            Some(p) => (0..self.dof).map(|i| spring_energy(&config, i, p[i])).collect(),
            None => e_now.clone(),
        };
        let ke = kinetic(lambda, &xdot);
        self.ledger.observe(&phases, &e_now, &e_prev, &dof_kinetic(&out.task_space.lambda_inv, &xdot));
        let mut jumps = Vec::new();
        let mut pot = 0.0;
        for i in 0..self.dof {
            pot += match &config {
                ControllerConfig::Fic(c) => {
                    let (p, jump) = self.offsets.potential(i, &c.stiffness[i], &self.attractors[i], &out.attractors[i], out.x_err[i]);
                    jumps.extend(jump);
                    p
                }
                ControllerConfig::Baseline(c) => 0.5 * c.stiffness[i] * out.x_err[i] * out.x_err[i],
            };
        }
        let v = ke + pot;
        // Offsets carry V across the switch unchanged; the raw jump is what
        // gets audited.
        for j in &jumps {
            self.monitor.switch(j);
        }
        self.monitor.push(t, v, self.forced);
        self.forced = self.scenario.boundary_schedule.is_some() || !matches!(self.scenario.reference, Reference::Static(_));

        self.held_tau = out.torques.iter().copied().collect();
        self.attractors = out.attractors.clone();
        self.prev_err = Some(out.x_err.clone());
        self.last_v = v;
        self.last = Some(out);
        Ok(())
    }

    fn record(&mut self, t: f64) {
        let x = self.plant.task_pose();
        let xdot = self.plant.task_velocity();
        let x_d = self.scenario.reference.at(t);
        let x_err = x_d.iter().zip(&x).map(|(d, x)| d - x).collect();
        let (phase, wrench) = match &self.last {
            Some(out) => {
                let phase = match &self.scenario.controller {
                    ControllerConfig::Fic(_) => out.attractors.iter().map(|a| a.phase.switch_value()).collect(),
                    ControllerConfig::Baseline(_) => out
                        .x_err
                        .iter()
                        .zip(&out.x_err_rate)
                        .map(|(e, r)| classify_phase(*e, *r).switch_value())
                        .collect(),
                };
                (phase, out.wrench.clone())
            }
            None => (vec![1; self.dof], vec![0.0; self.dof]),
        };
        self.rows.push(RecordRow {
            t,
            x_d,
            x,
            x_err,
            xdot,
            phase,
            wrench,
            contact_f: self.contact_now(),
            v: self.last_v,
            e_in_cum: self.ledger.e_in(),
            e_rel_cum: self.ledger.e_rel(),
        });
    }

    fn physics(&mut self, t: f64) -> Result<(), FicError> {
        let dt = self.scenario.dt;
        let c0 = self.contact_now();
        if c0 != 0.0 || self.profile.any_active(t) {
            self.forced = true;
        }
        let v0 = self.scenario.wall.map(|w| self.plant.task_velocity()[w.axis]).unwrap_or(0.0);
        let env = |time: f64, pose: &[f64], vel: &[f64]| self.environment(time, pose, vel);
        let next = self.plant.step_with(&self.held_tau, t, dt, self.scenario.integrator, &env)?;
        self.plant = next;
        if let Some(w) = self.scenario.wall {
            let c1 = self.contact_now();
            let v1 = self.plant.task_velocity()[w.axis];
            if c1 != 0.0 {
                self.forced = true;
            }
            self.ledger.contact_work += 0.25 * (c0 + c1) * (v0 + v1) * dt;
        }
        Ok(())
    }
}

/// Run one closed-loop episode. Invalid scenarios are rejected up front;
/// runtime failures stop the run and are reported inside the record.
pub fn run_scenario(scenario: &Scenario) -> Result<EpisodeRecord, ScenarioError> {
    scenario
        .validate()
        .map_err(|(pointer, message)| ScenarioError { pointer, message })?;
    let plant = scenario
        .build_plant()
        .map_err(|message| ScenarioError { pointer: "/plant".into(), message })?;
    let dof = scenario.plant.task_dof();
    let schedule = HoldSchedule::new(scenario.dt, scenario.feedback_hz)
        .map_err(|message| ScenarioError { pointer: "/feedback_hz".into(), message })?;
    let profile = scenario.perturbations.expand(dof, scenario.seed);
    let mut lp = Loop {
        scenario,
        dof,
        plant,
        attractors: vec![AttractorState::new(); dof],
        held_tau: vec![0.0; scenario.plant.joint_dof()],
        last: None,
        last_v: 0.0,
        prev_err: None,
        ledger: EnergyLedger::new(dof),
        monitor: LyapunovMonitor::new(LYAPUNOV_STEP_TOL),
        offsets: SwitchOffsets::new(dof),
        forced: false,
        rows: Vec::new(),
        profile,
    };

    let steps = scenario.steps();
    let mut failure = None;
    for k in 0..=steps {
        let t = k as f64 * scenario.dt;
        if schedule.is_sample(k) {
            if let Err(e) = lp.tick(t) {
                log::warn!("{}: stopped at t = {t}: {e}", scenario.name);
                failure = Some(RunFailure::new(t, &e));
                break;
            }
        }
        if k % scenario.record_every == 0 || k == steps {
            lp.record(t);
        }
        if k == steps {
            break;
        }
        if let Err(e) = lp.physics(t) {
            let at = match e {
                FicError::Blowup { t } => t,
                _ => t,
            };
            log::warn!("{}: stopped at t = {at}: {e}", scenario.name);
            failure = Some(RunFailure::new(at, &e));
            break;
        }
    }
    Ok(EpisodeRecord {
        name: scenario.name.clone(),
        dof,
        rows: lp.rows,
        pulses: lp.profile.pulses,
        ledger: lp.ledger.summary(),
        lyapunov: lp.monitor.into_report(),
        failure,
    })
}
