use serde::{Deserialize, Serialize};

/// Unilateral Kelvin–Voigt wall acting along one task axis.
///
/// `normal` is +1 when free space lies at coordinates above `offset` (a
/// floor), -1 when it lies below (a ceiling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactWall {
    pub axis: usize,
    pub offset: f64,
    #[serde(default = "default_normal")]
    pub normal: f64,
    pub stiffness: f64,
    #[serde(default)]
    pub damping: f64,
}

fn default_normal() -> f64 {
    1.0
}

impl ContactWall {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.stiffness >= 0.0 && self.damping >= 0.0) {
            return Err("wall stiffness and damping must be >= 0".into());
        }
        if self.normal != 1.0 && self.normal != -1.0 {
            return Err("wall normal must be +1 or -1".into());
        }
        Ok(())
    }

    pub fn penetration(&self, x: f64) -> f64 {
        (self.normal * (self.offset - x)).max(0.0)
    }

    /// Signed force on the body along `axis`; never pulls the body in.
    pub fn force(&self, x: f64, xdot: f64) -> f64 {
        let depth = self.normal * (self.offset - x);
        if depth <= 0.0 {
            return 0.0;
        }
        let depth_rate = -self.normal * xdot;
        let push = self.stiffness * depth + self.damping * depth_rate;
        self.normal * push.max(0.0)
    }
}

/// Free-function form of [`ContactWall::force`].
pub fn contact_force(wall: &ContactWall, x: f64, xdot: f64) -> f64 {
    wall.force(x, xdot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor() -> ContactWall {
        ContactWall {
            axis: 0,
            offset: 0.0,
            normal: 1.0,
            stiffness: 1e4,
            damping: 50.0,
        }
    }

    #[test]
    fn linear_spring() {
        assert!((floor().force(-0.01, 0.0) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn no_penetration() {
        assert_eq!(floor().force(0.02, -1.0), 0.0);
        assert_eq!(floor().force(0.0, -1.0), 0.0);
    }

    #[test]
    fn non_adhesive_during_fast_retreat() {
        // spring 10 N, damping term -50 N
        assert_eq!(floor().force(-0.001, 1.0), 0.0);
    }

    #[test]
    fn ceiling_pushes_down() {
        let w = ContactWall { normal: -1.0, offset: 1.0, ..floor() };
        assert!((w.force(1.01, 0.0) + 100.0).abs() < 1e-9);
        assert_eq!(w.force(0.99, 0.0), 0.0);
    }
}
