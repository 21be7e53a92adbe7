//! Passivity and stability instrumentation.
//!
//! `E_in` is the spring energy absorbed while diverging, evaluated in closed
//! form, so it does not depend on the sampling rate. `E_rel` is the peak
//! kinetic energy of each convergence window. The controller is passive when
//! `E_rel - E_in <= 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attractor::{AttractorState, Phase};
use crate::spring::StiffnessParams;

pub const PASSIVITY_TOL: f64 = 1e-4;
pub const LYAPUNOV_STEP_TOL: f64 = 1e-6;

/// Spring energy absorbed along a divergence path, from its endpoints.
pub fn energy_in(params: &StiffnessParams, path: &[f64]) -> f64 {
    match (path.first(), path.last()) {
        (Some(a), Some(b)) => params.spring_energy(*b) - params.spring_energy(*a),
        _ => 0.0,
    }
}

/// Peak kinetic energy `½ λ ẋ²` over a convergence window.
pub fn energy_released(lambda: &[f64], xdot: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(xdot)
        .map(|(l, v)| 0.5 * l * v * v)
        .fold(0.0, f64::max)
}

/// Work done by the FIC spring between two errors; path independent.
pub fn fic_work(params: &StiffnessParams, x_a: f64, x_b: f64) -> f64 {
    params.spring_energy(x_b) - params.spring_energy(x_a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub x: f64,
    pub xdot: f64,
    pub xddot: f64,
}

/// Zero-order-hold estimate of the inertia and damping work of a
/// constant-gain impedance controller: `Σ (k_D ẍ + k_P ẋ) Δx`.
pub fn ic_work_discrete(k_d: f64, k_p: f64, samples: &[TrajectorySample]) -> f64 {
    samples
        .windows(2)
        .map(|w| (k_d * w[0].xddot + k_p * w[0].xdot) * (w[1].x - w[0].x))
        .sum()
}

/// `x(t) = t³ + t² + t` and its derivatives.
pub fn cubic_reference(t: f64) -> TrajectorySample {
    TrajectorySample {
        x: t * t * t + t * t + t,
        xdot: 3.0 * t * t + 2.0 * t + 1.0,
        xddot: 6.0 * t + 2.0,
    }
}

/// Analytic inertia + damping work for [`cubic_reference`] on `[0, 1]`:
/// `k_D [ẋ²/2]₀¹ + k_P ∫₀¹ ẋ² dt = 17.5 k_D + (167/15) k_P`.
pub fn cubic_reference_ic_work(k_d: f64, k_p: f64) -> f64 {
    17.5 * k_d + 167.0 / 15.0 * k_p
}

/// Uniform samples at `rate` Hz over `[0, duration]`, endpoints included.
pub fn sample_uniform(f: impl Fn(f64) -> TrajectorySample, rate: f64, duration: f64) -> Vec<TrajectorySample> {
    let n = (duration * rate).round() as usize;
    (0..=n).map(|i| f(i as f64 * duration / n as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub rate_hz: f64,
    pub ic_work: f64,
    pub ic_error: f64,
    pub fic_work: f64,
    /// Per-sample sum of FIC spring-energy increments.
    pub fic_work_summed: f64,
}

/// Sampling-rate sweep of the IC versus FIC work on the cubic reference.
pub fn energy_drift(rates: &[f64], k_d: f64, k_p: f64, spring: &StiffnessParams) -> Vec<DriftRow> {
    let exact = cubic_reference_ic_work(k_d, k_p);
    rates
        .iter()
        .map(|&rate| {
            let samples = sample_uniform(cubic_reference, rate, 1.0);
            let ic = ic_work_discrete(k_d, k_p, &samples);
            let first = samples.first().map(|s| s.x).unwrap_or(0.0);
            let last = samples.last().map(|s| s.x).unwrap_or(0.0);
            let summed = samples.windows(2).map(|w| fic_work(spring, w[0].x, w[1].x)).sum();
            DriftRow {
                rate_hz: rate,
                ic_work: ic,
                ic_error: (ic - exact).abs(),
                fic_work: fic_work(spring, first, last),
                fic_work_summed: summed,
            }
        })
        .collect()
}

/// Bookkeeping for one DoF. Absorbed energy is the spring energy gained over
/// each divergence segment (counted when non-negative); released energy is
/// the peak kinetic energy of the DoF inside each of its convergence windows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DofLedger {
    phase: Phase,
    started: bool,
    open_in: f64,
    closed_in: f64,
    open_rel: f64,
    closed_rel: f64,
}

impl DofLedger {
    /// Feed one controller tick. `energy` is the spring energy at the current
    /// error under the current parameters, `energy_prev` the energy of the
    /// previous error under the same parameters, `kinetic` the DoF's kinetic
    /// energy now.
    pub fn observe(&mut self, phase: Phase, energy: f64, energy_prev: f64, kinetic: f64) {
        if !self.started {
            self.started = true;
            self.phase = phase;
            if phase == Phase::Convergence {
                self.open_rel = kinetic;
            }
            return;
        }
        match (self.phase, phase) {
            (Phase::Divergence, Phase::Divergence) => self.open_in += energy - energy_prev,
            (Phase::Divergence, Phase::Convergence) => {
                // The apex sample still belongs to the absorbing segment.
                self.open_in += energy - energy_prev;
                self.closed_in += self.open_in.max(0.0);
                self.open_in = 0.0;
                self.open_rel = kinetic;
            }
            (Phase::Convergence, Phase::Convergence) => self.open_rel = self.open_rel.max(kinetic),
            (Phase::Convergence, Phase::Divergence) => {
                self.closed_rel += self.open_rel;
                self.open_rel = 0.0;
            }
        }
        self.phase = phase;
    }

    pub fn e_in(&self) -> f64 {
        self.closed_in + if self.phase == Phase::Divergence { self.open_in.max(0.0) } else { 0.0 }
    }

    pub fn e_rel(&self) -> f64 {
        self.closed_rel + if self.phase == Phase::Convergence { self.open_rel } else { 0.0 }
    }
}

/// Kinetic energy attributed to each task DoF: `½ ẋ_i² / (Λ⁻¹)_ii`, the
/// inertia the DoF shows when pushed alone. Exact for decoupled plants.
pub fn dof_kinetic(lambda_inv: &DMatrix<f64>, xdot: &[f64]) -> Vec<f64> {
    xdot.iter().enumerate().map(|(i, v)| 0.5 * v * v / lambda_inv[(i, i)]).collect()
}

/// Episode ledger: per-DoF absorbed and released energy, summed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub dofs: Vec<DofLedger>,
    /// Net work done on the plant by contact forces.
    pub contact_work: f64,
}

impl EnergyLedger {
    pub fn new(dof: usize) -> Self {
        EnergyLedger {
            dofs: vec![DofLedger::default(); dof],
            ..Default::default()
        }
    }

    /// Feed one controller tick for all DoF at once.
    pub fn observe(&mut self, phases: &[Phase], energy: &[f64], energy_prev: &[f64], kinetic: &[f64]) {
        for (i, d) in self.dofs.iter_mut().enumerate() {
            d.observe(phases[i], energy[i], energy_prev[i], kinetic[i]);
        }
    }

    pub fn e_in(&self) -> f64 {
        self.dofs.iter().map(DofLedger::e_in).sum()
    }

    pub fn e_rel(&self) -> f64 {
        self.dofs.iter().map(DofLedger::e_rel).sum()
    }

    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            e_in: self.e_in(),
            e_rel: self.e_rel(),
            passivity_margin: passivity_margin(self),
            contact_work: self.contact_work,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub e_in: f64,
    pub e_rel: f64,
    pub passivity_margin: f64,
    pub contact_work: f64,
}

impl LedgerSummary {
    pub fn is_passive(&self) -> bool {
        self.passivity_margin <= PASSIVITY_TOL
    }
}

/// `E_rel - E_in`; passive when `<= 0` up to [`PASSIVITY_TOL`].
pub fn passivity_margin(ledger: &EnergyLedger) -> f64 {
    ledger.e_rel() - ledger.e_in()
}

/// Potential part of the Lyapunov candidate for one DoF, before any
/// continuity offset.
///
/// Diverging: the spring energy `E(x̃)`. Converging: the midpoint spring
/// potential plus the constant that makes it equal `E_in` at the apex. That
/// constant is `½ E_in` unless the convergence force saturates.
pub fn lyapunov_potential(params: &StiffnessParams, state: &AttractorState, x_err: f64) -> f64 {
    match state.phase {
        Phase::Divergence => params.spring_energy(x_err),
        Phase::Convergence => {
            state.convergence_potential(x_err) + state.e_in - state.convergence_potential(state.x_tilde_max)
        }
    }
}

/// Raw potential change across a switch evaluated at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchJump {
    pub from: Phase,
    pub to: Phase,
    pub raw: f64,
}

/// Per-DoF constants re-chosen at every phase switch so the candidate stays
/// continuous; inside a phase the candidate is the raw potential plus the
/// constant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwitchOffsets {
    offsets: Vec<f64>,
}

impl SwitchOffsets {
    pub fn new(dof: usize) -> Self {
        SwitchOffsets { offsets: vec![0.0; dof] }
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    /// Potential of DoF `i` at `x_err` after the tick moved its attractor from
    /// `before` to `after`.
    pub fn potential(
        &mut self,
        i: usize,
        params: &StiffnessParams,
        before: &AttractorState,
        after: &AttractorState,
        x_err: f64,
    ) -> (f64, Option<SwitchJump>) {
        let raw_after = lyapunov_potential(params, after, x_err);
        if before.phase == after.phase {
            return (raw_after + self.offsets[i], None);
        }
        let raw_before = lyapunov_potential(params, before, x_err);
        let value = raw_before + self.offsets[i];
        self.offsets[i] = value - raw_after;
        let jump = SwitchJump { from: before.phase, to: after.phase, raw: raw_after - raw_before };
        (raw_after + self.offsets[i], Some(jump))
    }
}

pub fn lyapunov_value(params: &StiffnessParams, state: &AttractorState, lambda: f64, x_err: f64, xdot: f64) -> f64 {
    0.5 * lambda * xdot * xdot + lyapunov_potential(params, state, x_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovFlag {
    pub t: f64,
    pub increase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub samples: usize,
    pub switches: usize,
    pub flags: Vec<LyapunovFlag>,
    /// Largest step increase outside forced intervals.
    pub max_increase: f64,
    /// Largest raw potential jump at divergence -> convergence switches,
    /// where the attractor construction alone keeps V continuous.
    pub max_apex_jump: f64,
    /// Largest raw jump at convergence -> divergence switches; absorbed by
    /// the continuity offset.
    pub max_release_jump: f64,
}

impl LyapunovReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Streams V samples and flags increases outside externally forced steps.
#[derive(Debug, Clone)]
pub struct LyapunovMonitor {
    tolerance: f64,
    last: Option<f64>,
    report: LyapunovReport,
}

impl LyapunovMonitor {
    pub fn new(tolerance: f64) -> Self {
        LyapunovMonitor {
            tolerance,
            last: None,
            report: LyapunovReport::default(),
        }
    }

    /// `forced` marks a step during which external work entered the system
    /// (active pulse or contact) since the previous sample.
    pub fn push(&mut self, t: f64, value: f64, forced: bool) {
        if let Some(prev) = self.last {
            let inc = value - prev;
            if !forced {
                if inc > self.report.max_increase {
                    self.report.max_increase = inc;
                }
                if inc > self.tolerance {
                    self.report.flags.push(LyapunovFlag { t, increase: inc });
                }
            }
        }
        self.last = Some(value);
        self.report.samples += 1;
    }

    pub fn switch(&mut self, jump: &SwitchJump) {
        self.report.switches += 1;
        let slot = match jump.from {
            Phase::Divergence => &mut self.report.max_apex_jump,
            Phase::Convergence => &mut self.report.max_release_jump,
        };
        *slot = slot.max(jump.raw.abs());
    }

    pub fn report(&self) -> &LyapunovReport {
        &self.report
    }

    pub fn into_report(self) -> LyapunovReport {
        self.report
    }
}

/// Offline check over a recorded series of (t, V, forced).
pub fn lyapunov_monitor(series: &[(f64, f64, bool)], tolerance: f64) -> LyapunovReport {
    let mut m = LyapunovMonitor::new(tolerance);
    for &(t, v, forced) in series {
        m.push(t, v, forced);
    }
    m.into_report()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p0() -> StiffnessParams {
        StiffnessParams::new(0.0, 30.0, 0.05).unwrap()
    }

    #[test]
    fn energy_in_examples() {
        let p = p0();
        assert_relative_eq!(energy_in(&p, &[0.0, 0.05]), 0.11704834043148477, max_relative = 1e-12);
        assert_eq!(energy_in(&p, &[]), 0.0);
        let coarse: Vec<f64> = (0..=5).map(|i| 0.01 * i as f64).collect();
        let fine: Vec<f64> = (0..=5000).map(|i| 0.05 * i as f64 / 5000.0).collect();
        assert_eq!(energy_in(&p, &coarse), energy_in(&p, &fine));
    }

    #[test]
    fn energy_released_examples() {
        assert_eq!(energy_released(&[1.0, 1.0], &[0.0, 0.0]), 0.0);
        let v = [0.1, 0.3, -0.2];
        let one = energy_released(&[1.0; 3], &v);
        let two = energy_released(&[2.0; 3], &v);
        assert_relative_eq!(two, 2.0 * one);
        assert_relative_eq!(one, 0.045);
    }

    #[test]
    fn fic_work_examples() {
        let p = p0();
        assert_eq!(fic_work(&p, 0.03, 0.03), 0.0);
        assert_relative_eq!(fic_work(&p, 0.0, 0.05), 0.11704834043148477, max_relative = 1e-12);
        assert_eq!(fic_work(&p, 0.0, 0.07) + fic_work(&p, 0.07, 0.0), 0.0);
    }

    #[test]
    fn ic_work_constant_trajectory_is_zero() {
        let s = vec![TrajectorySample { x: 0.4, xdot: 0.0, xddot: 0.0 }; 100];
        assert_eq!(ic_work_discrete(1.0, 1.0, &s), 0.0);
    }

    #[test]
    fn ic_work_converges_to_analytic() {
        let exact = cubic_reference_ic_work(1.0, 1.0);
        assert_relative_eq!(exact, 28.633333333333333, max_relative = 1e-14);
        let fine = ic_work_discrete(1.0, 1.0, &sample_uniform(cubic_reference, 10_000.0, 1.0));
        assert!(((fine - exact) / exact).abs() < 0.005);
    }

    #[test]
    fn ic_drift_shrinks_with_rate_and_fic_is_exact() {
        let rows = energy_drift(&[20.0, 100.0, 1000.0, 10_000.0], 1.0, 1.0, &p0());
        for w in rows.windows(2) {
            assert!(w[0].ic_error > w[1].ic_error);
        }
        for r in &rows {
            assert_eq!(r.fic_work, rows[0].fic_work);
            assert!((r.fic_work_summed - r.fic_work).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_ic_loop_is_not_conservative() {
        // x(t) = sin(2πt): closed loop over one period
        let f = |t: f64| {
            let w = 2.0 * std::f64::consts::PI;
            TrajectorySample { x: (w * t).sin(), xdot: w * (w * t).cos(), xddot: -w * w * (w * t).sin() }
        };
        let coarse = ic_work_discrete(1.0, 1.0, &sample_uniform(f, 20.0, 1.0)).abs();
        let fine = ic_work_discrete(1.0, 1.0, &sample_uniform(f, 1000.0, 1.0)).abs();
        assert!(coarse > 0.0 && fine > 0.0);
        let p = p0();
        let loop_work: f64 = sample_uniform(f, 20.0, 1.0).windows(2).map(|w| fic_work(&p, w[0].x, w[1].x)).sum();
        assert!(loop_work.abs() < 1e-12);
    }

    #[test]
    fn ledger_single_cycle() {
        let p = p0();
        let mut l = EnergyLedger::new(1);
        let xs = [0.0, 0.02, 0.04, 0.05];
        let mut prev = 0.0;
        for &x in &xs {
            l.observe(&[Phase::Divergence], &[p.spring_energy(x)], &[p.spring_energy(prev)], &[0.0]);
            prev = x;
        }
        assert_relative_eq!(l.e_in(), p.spring_energy(0.05), max_relative = 1e-12);
        for (x, ke) in [(0.05, 0.001), (0.025, 0.0585), (0.0, 0.0001)] {
            l.observe(&[Phase::Convergence], &[p.spring_energy(x)], &[p.spring_energy(prev)], &[ke]);
            prev = x;
        }
        assert_relative_eq!(l.e_rel(), 0.0585);
        l.observe(&[Phase::Divergence], &[0.0], &[p.spring_energy(prev)], &[0.0]);
        let s = l.summary();
        assert_relative_eq!(s.passivity_margin, 0.0585 - p.spring_energy(0.05), max_relative = 1e-12);
        assert!(s.is_passive());
    }

    #[test]
    fn release_windows_are_per_dof() {
        let mut l = EnergyLedger::new(2);
        let c = Phase::Convergence;
        let d = Phase::Divergence;
        let z = [0.0, 0.0];
        l.observe(&[d, d], &z, &z, &[0.0, 0.0]);
        l.observe(&[c, d], &z, &z, &[0.2, 0.9]);
        l.observe(&[c, c], &z, &z, &[0.5, 0.1]);
        l.observe(&[d, c], &z, &z, &[0.7, 0.3]);
        l.observe(&[d, d], &z, &z, &[0.0, 0.0]);
        l.observe(&[d, c], &z, &z, &[0.4, 0.05]);
        // DoF 0 keeps 0.5; DoF 1 keeps 0.3 and then 0.05. Motion while
        // diverging never counts.
        assert_relative_eq!(l.dofs[0].e_rel(), 0.5);
        assert_relative_eq!(l.e_rel(), 0.85);
    }

    #[test]
    fn dof_kinetic_uses_apparent_inertia() {
        let li = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.25]);
        let k = dof_kinetic(&li, &[1.0, 2.0]);
        assert_relative_eq!(k[0], 1.0);
        assert_relative_eq!(k[1], 8.0);
    }

    #[test]
    fn empty_ledger_margin_is_zero() {
        let l = EnergyLedger::new(3);
        assert_eq!(passivity_margin(&l), 0.0);
    }

    #[test]
    fn lyapunov_at_origin_and_apex() {
        let p = p0();
        let div = AttractorState::new();
        assert_eq!(lyapunov_value(&p, &div, 1.0, 0.0, 0.0), 0.0);
        assert_relative_eq!(lyapunov_value(&p, &div, 1.0, 0.05, 0.0), 0.11704834043148477, max_relative = 1e-12);
        let conv = div.update(&p, 0.05, -0.01);
        let before = lyapunov_value(&p, &div, 1.0, 0.05, 0.01);
        let after = lyapunov_value(&p, &conv, 1.0, 0.05, 0.01);
        assert!((before - after).abs() < 1e-15);
        // Raw midpoint form sits at E_in on target; the offset absorbs it.
        assert_relative_eq!(lyapunov_value(&p, &conv, 1.0, 0.0, 0.0), conv.e_in, max_relative = 1e-12);
    }

    #[test]
    fn offsets_make_switches_continuous() {
        let p = p0();
        let mut off = SwitchOffsets::new(1);
        let div = AttractorState::new();
        let conv = div.update(&p, 0.05, -0.01);
        let (v1, j1) = off.potential(0, &p, &div, &conv, 0.05);
        assert!(j1.unwrap().raw.abs() < 1e-15);
        assert_relative_eq!(v1, p.spring_energy(0.05), max_relative = 1e-12);
        // Turn back near the midpoint: raw potentials differ, V does not.
        let back = conv.update(&p, 0.02, 0.003);
        assert_eq!(back.phase, Phase::Divergence);
        let inside = off.potential(0, &p, &conv, &conv, 0.02).0;
        let (v2, j2) = off.potential(0, &p, &conv, &back, 0.02);
        assert!(j2.unwrap().raw.abs() > 1e-3);
        assert!((v2 - inside).abs() < 1e-15);
    }

    #[test]
    fn monitor_ignores_forced_steps() {
        let series = [(0.0, 1.0, false), (0.1, 2.0, true), (0.2, 1.5, false), (0.3, 1.6, false)];
        let r = lyapunov_monitor(&series, 1e-6);
        assert_eq!(r.flags.len(), 1);
        assert_relative_eq!(r.flags[0].t, 0.3);
    }
}
