/// Controller sample instants on the physics grid.
///
/// The n-th sample falls on physics step `floor(n * ratio)` with
/// `ratio = 1 / (rate * dt)`; the command is held until the next one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldSchedule {
    ratio: f64,
}

impl HoldSchedule {
    pub fn new(dt: f64, rate: f64) -> Result<Self, String> {
        if !(dt > 0.0 && rate > 0.0) {
            return Err(format!("dt ({dt}) and rate ({rate}) must be > 0"));
        }
        if rate * dt > 1.0 + 1e-9 {
            return Err(format!("rate {rate} Hz exceeds the physics rate {} Hz", 1.0 / dt));
        }
        Ok(HoldSchedule { ratio: (1.0 / (rate * dt)).max(1.0) })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    fn step_of(&self, n: u64) -> u64 {
        // Guard against 10.000000000000002-style ratios drifting the grid.
        (n as f64 * self.ratio + 1e-6).floor() as u64
    }

    pub fn is_sample(&self, k: usize) -> bool {
        let k = k as u64;
        let n = (k as f64 / self.ratio).floor() as u64;
        (n.saturating_sub(1)..=n + 1).any(|m| self.step_of(m) == k)
    }

    /// Index of the most recent sample step at or before `k`.
    pub fn held_index(&self, k: usize) -> usize {
        let k = k as u64;
        let mut n = (k as f64 / self.ratio).floor() as u64 + 1;
        while self.step_of(n) > k {
            n -= 1;
        }
        self.step_of(n) as usize
    }
}

/// Zero-order hold of a signal sampled on the physics grid.
pub fn zoh_sample(signal: &[f64], dt: f64, rate: f64) -> Result<Vec<f64>, String> {
    let s = HoldSchedule::new(dt, rate)?;
    Ok((0..signal.len()).map(|k| signal[s.held_index(k)]).collect())
}
