//! Closed-loop simulation: scenarios, the sampled control loop, metrics and
//! parameter sweeps.

pub mod calibrate;
pub mod metrics;
pub mod portrait;
pub mod run;
pub mod scenario;
pub mod zoh;

pub use calibrate::{calibrate_independent, calibrate_sweep, run_sweep, CalibrationRange, CalibrationRow, CalibrationTable};
pub use metrics::{compute_metrics, detect_oscillation, record_oscillates, recovery_time, Metrics};
pub use portrait::{phase_portrait, PortraitCurve};
pub use run::{run_scenario, EpisodeRecord, RecordRow, RunFailure, ScenarioError};
pub use scenario::{
    ArmSpec, BoundarySchedule, CircleRef, PerturbationSpec, PlantSpec, PointMassSpec, RandomPulses, Reference, Scenario, SinusoidRef,
    StaticRef,
};
pub use zoh::{zoh_sample, HoldSchedule};
