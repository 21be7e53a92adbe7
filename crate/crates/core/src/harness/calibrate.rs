use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::record_oscillates;
use super::run::{run_scenario, EpisodeRecord, ScenarioError};
use super::scenario::Scenario;
use crate::controllers::ControllerConfig;

/// Trailing window inspected for sustained oscillation (s).
pub const CALIBRATION_WINDOW: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub x_b: f64,
    /// Largest stable candidate, `None` when every candidate oscillated.
    pub w_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRange {
    pub x_b_min: f64,
    pub x_b_max: f64,
    pub w_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationTable {
    /// Consecutive boundaries sharing a saturation force, merged.
    pub fn ranges(&self) -> Vec<CalibrationRange> {
        let mut out: Vec<CalibrationRange> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some(last) if last.w_max == r.w_max => {
                    last.x_b_min = last.x_b_min.min(r.x_b);
                    last.x_b_max = last.x_b_max.max(r.x_b);
                }
                _ => out.push(CalibrationRange { x_b_min: r.x_b, x_b_max: r.x_b, w_max: r.w_max }),
            }
        }
        out
    }

    /// `w_max` never decreases as the boundary grows (missing entries count
    /// as zero).
    pub fn is_monotone(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.x_b.total_cmp(&b.x_b));
        rows.windows(2).all(|w| w[0].w_max.unwrap_or(0.0) <= w[1].w_max.unwrap_or(0.0))
    }
}

/// Set the boundary and saturation force of one DoF in a FIC scenario.
pub fn with_spring(base: &Scenario, dof: usize, x_b: f64, w_max: f64) -> Option<Scenario> {
    let mut s = base.clone();
    let ControllerConfig::Fic(c) = &mut s.controller else { return None };
    let p = c.stiffness.get(dof)?;
    c.stiffness[dof] = crate::spring::StiffnessParams::new(p.k_const(), w_max, x_b).ok()?;
    s.name = format!("{}[x_b={x_b},w_max={w_max}]", base.name);
    Some(s)
}

fn is_stable(base: &Scenario, dof: usize, x_b: f64, w_max: f64) -> bool {
    let Some(s) = with_spring(base, dof, x_b, w_max) else { return false };
    match run_scenario(&s) {
        Ok(rec) => {
            let osc = record_oscillates(&rec, dof, CALIBRATION_WINDOW);
            log::debug!("calibrate x_b={x_b} w_max={w_max}: oscillating={osc}");
            !osc
        }
        Err(_) => false,
    }
}

fn descending(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Sequential calibration: shrink the boundary through `x_b_grid` (largest
/// first) and, whenever the current saturation force oscillates, lower it to
/// the next stable candidate. The force reached is kept for all smaller
/// boundaries, so rows come out in descending `x_b` order.
pub fn calibrate_sweep(base: &Scenario, dof: usize, x_b_grid: &[f64], candidates: &[f64]) -> CalibrationTable {
    let cands = descending(candidates);
    let mut from = 0;
    let mut rows = Vec::new();
    for x_b in descending(x_b_grid) {
        let found = cands[from..].par_iter().position_first(|&w| is_stable(base, dof, x_b, w));
        let w_max = match found {
            Some(i) => {
                from += i;
                Some(cands[from])
            }
            None => {
                from = cands.len();
                None
            }
        };
        rows.push(CalibrationRow { x_b, w_max });
    }
    CalibrationTable { rows }
}

/// Each boundary evaluated on its own: the largest stable candidate with no
/// memory of larger boundaries. Diagnostic counterpart of [`calibrate_sweep`].
pub fn calibrate_independent(base: &Scenario, dof: usize, x_b_grid: &[f64], candidates: &[f64]) -> CalibrationTable {
    let cands = descending(candidates);
    let rows = x_b_grid
        .par_iter()
        .map(|&x_b| CalibrationRow { x_b, w_max: cands.iter().copied().find(|&w| is_stable(base, dof, x_b, w)) })
        .collect();
    CalibrationTable { rows }
}

/// Run scenarios in parallel; results keep the input order.
pub fn run_sweep(scenarios: &[Scenario]) -> Vec<Result<EpisodeRecord, ScenarioError>> {
    scenarios.par_iter().map(run_scenario).collect()
}
