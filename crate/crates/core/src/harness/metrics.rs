use serde::{Deserialize, Serialize};

use super::run::EpisodeRecord;
use crate::attractor::RATE_EPS;

/// Fraction of the post-pulse peak error regarded as recovered.
pub const RECOVERY_FRACTION: f64 = 0.05;
/// The error must stay under the threshold for this long (s).
pub const RECOVERY_DWELL: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: Vec<f64>,
    pub mean_abs_err: Vec<f64>,
    pub std_abs_err: Vec<f64>,
    /// One entry per pulse, `None` when the error never settled.
    pub recovery_times: Vec<Option<f64>>,
    pub mean_recovery_time: Option<f64>,
    /// Time after which the error norm stays within the recovery band of
    /// the initial error norm.
    pub convergence_time: Option<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Time from `pulse_end` until `error` drops under `fraction` of its peak on
/// `[pulse_start, window_end)` and remains there for `dwell`.
pub fn recovery_time(
    times: &[f64],
    error: &[f64],
    pulse_start: f64,
    pulse_end: f64,
    window_end: f64,
    fraction: f64,
    dwell: f64,
) -> Option<f64> {
    let idx: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= pulse_start && times[i] < window_end)
        .collect();
    let (peak_i, peak) = idx
        .iter()
        .map(|&i| (i, error[i]))
        .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if peak_i == usize::MAX || !(peak > 0.0) {
        return None;
    }
    let thr = fraction * peak;
    let mut candidate: Option<usize> = None;
    for &i in &idx {
        if times[i] < pulse_end || i < peak_i {
            continue;
        }
        if error[i] < thr {
            let c = *candidate.get_or_insert(i);
            if times[i] - times[c] >= dwell - 1e-12 {
                return Some(times[c] - pulse_end);
            }
        } else {
            candidate = None;
        }
    }
    None
}

pub fn compute_metrics(record: &EpisodeRecord) -> Metrics {
    let n = record.rows.len().max(1) as f64;
    let dof = record.dof;
    let mut rmse = vec![0.0; dof];
    let mut mean = vec![0.0; dof];
    for r in &record.rows {
        for i in 0..dof {
            rmse[i] += r.x_err[i] * r.x_err[i];
            mean[i] += r.x_err[i].abs();
        }
    }
    for i in 0..dof {
        rmse[i] = (rmse[i] / n).sqrt();
        mean[i] /= n;
    }
    let mut std = vec![0.0; dof];
    for r in &record.rows {
        for i in 0..dof {
            std[i] += (r.x_err[i].abs() - mean[i]).powi(2);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
    }

    let times = record.times();
    let err: Vec<f64> = record.rows.iter().map(|r| norm(&r.x_err)).collect();
    let t_end = times.last().copied().unwrap_or(0.0) + 1e-12;
    let recovery_times: Vec<Option<f64>> = record
        .pulses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let window_end = record.pulses.get(k + 1).map(|q| q.start).unwrap_or(t_end);
            recovery_time(&times, &err, p.start, p.end(), window_end, RECOVERY_FRACTION, RECOVERY_DWELL)
        })
        .collect();
    let settled: Vec<f64> = recovery_times.iter().flatten().copied().collect();
    let mean_recovery_time = (!settled.is_empty() && settled.len() == recovery_times.len())
        .then(|| settled.iter().sum::<f64>() / settled.len() as f64);

    let convergence_time = err.first().and_then(|&e0| {
        let thr = RECOVERY_FRACTION * e0;
        if !(e0 > 0.0) {
            return None;
        }
        let last_out = err.iter().rposition(|e| *e >= thr);
        match last_out {
            None => Some(0.0),
            Some(i) if i + 1 < err.len() => Some(times[i + 1]),
            _ => None,
        }
    });

    Metrics {
        rmse,
        mean_abs_err: mean,
        std_abs_err: std,
        recovery_times,
        mean_recovery_time,
        convergence_time,
    }
}

/// Minimum number of velocity sign changes in the window.
pub const OSCILLATION_CROSSINGS: usize = 8;
/// Peak retention required between the two halves of the window.
pub const OSCILLATION_RETENTION: f64 = 0.9;
/// Error peaks below this are regarded as at rest.
pub const OSCILLATION_FLOOR: f64 = 1e-6;

/// Sustained oscillation over the trailing `window` seconds: more than
/// [`OSCILLATION_CROSSINGS`] sign changes of the error rate, with the
/// second-half peak error at least [`OSCILLATION_RETENTION`] of the
/// first-half peak.
pub fn detect_oscillation(times: &[f64], x_err: &[f64], rate: &[f64], window: f64) -> bool {
    let Some(&t_end) = times.last() else { return false };
    let t0 = t_end - window;
    let mid = t_end - 0.5 * window;
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= t0).collect();
    let mut crossings = 0;
    let mut last_sign = 0.0;
    for &i in &idx {
        if rate[i].abs() < RATE_EPS {
            continue;
        }
        let s = rate[i].signum();
        if last_sign != 0.0 && s != last_sign {
            crossings += 1;
        }
        last_sign = s;
    }
    let peak = |lo: f64, hi: f64| {
        idx.iter()
            .filter(|&&i| times[i] >= lo && times[i] < hi)
            .map(|&i| x_err[i].abs())
            .fold(0.0, f64::max)
    };
    let first = peak(t0, mid);
    let second = peak(mid, t_end + 1e-12);
    crossings > OSCILLATION_CROSSINGS && first > OSCILLATION_FLOOR && second >= OSCILLATION_RETENTION * first
}

/// [`detect_oscillation`] on one DoF of a record. A run that failed early
/// counts as oscillating (unstable).
pub fn record_oscillates(record: &EpisodeRecord, dof: usize, window: f64) -> bool {
    if !record.completed() {
        return true;
    }
    let times = record.times();
    let err = record.column(|r| r.x_err[dof]);
    let rate = record.column(|r| -r.xdot[dof]);
    detect_oscillation(&times, &err, &rate, window)
}
