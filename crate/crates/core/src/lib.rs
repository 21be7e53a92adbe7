//! Fractal impedance control: a nonlinear task-space spring with a
//! per-DoF energy-limiting attractor, plants to run it on, energy audits and
//! a sampled closed-loop simulation harness.

pub mod attractor;
pub mod config;
pub mod controllers;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod harness;
pub mod spring;

pub use attractor::{classify_phase, fic_wrench, update_attractor, AttractorState, Phase};
pub use controllers::{
    baseline_control_torques, control_torques, fic_control_torques, BaselineConfig, ControlOutput, ControllerConfig,
    FicConfig, NullSpaceGains,
};
pub use error::{FicError, Result};
pub use harness::{run_scenario, EpisodeRecord, Scenario};
pub use spring::{beta_squared, StiffnessParams};
