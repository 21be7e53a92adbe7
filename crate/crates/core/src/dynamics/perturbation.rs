use serde::{Deserialize, Serialize};

/// Constant wrench applied on `[start, start + duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub start: f64,
    pub duration: f64,
    pub wrench: Vec<f64>,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PerturbationProfile {
    pub pulses: Vec<Pulse>,
}

impl PerturbationProfile {
    pub fn new(pulses: Vec<Pulse>) -> Self {
        PerturbationProfile { pulses }
    }

    pub fn validate(&self, dof: usize) -> Result<(), String> {
        for (i, p) in self.pulses.iter().enumerate() {
            if p.wrench.len() != dof {
                return Err(format!("pulse {i}: wrench has {} entries, plant has {dof} task DoF", p.wrench.len()));
            }
            if !(p.start >= 0.0 && p.duration > 0.0 && p.start.is_finite() && p.duration.is_finite()) {
                return Err(format!("pulse {i}: start must be >= 0 and duration > 0"));
            }
            if p.wrench.iter().any(|w| !w.is_finite()) {
                return Err(format!("pulse {i}: non-finite wrench"));
            }
        }
        for (i, a) in self.pulses.iter().enumerate() {
            for (j, b) in self.pulses.iter().enumerate().skip(i + 1) {
                let overlap = a.start < b.end() && b.start < a.end();
                let shared = a.wrench.iter().zip(&b.wrench).any(|(x, y)| *x != 0.0 && *y != 0.0);
                if overlap && shared {
                    return Err(format!("pulses {i} and {j} overlap in time on the same DoF"));
                }
            }
        }
        Ok(())
    }

    pub fn wrench_at(&self, t: f64, dof: usize) -> Vec<f64> {
        let mut w = vec![0.0; dof];
        for p in self.pulses.iter().filter(|p| p.is_active(t)) {
            for (acc, v) in w.iter_mut().zip(&p.wrench) {
                *acc += v;
            }
        }
        w
    }

    pub fn any_active(&self, t: f64) -> bool {
        self.pulses.iter().any(|p| p.is_active(t))
    }
}

/// Free-function form of [`PerturbationProfile::wrench_at`].
pub fn external_wrench(profile: &PerturbationProfile, t: f64, dof: usize) -> Vec<f64> {
    profile.wrench_at(t, dof)
}
