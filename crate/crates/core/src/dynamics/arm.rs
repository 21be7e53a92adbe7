//! Planar three-link arm with closed-form joint-space dynamics.

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub const JOINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub length: f64,
    pub mass: f64,
    /// Distance of the centre of mass from the proximal joint.
    pub com: f64,
    /// Rotational inertia about the centre of mass.
    pub inertia: f64,
}

impl Link {
    /// Uniform rod.
    pub fn rod(length: f64, mass: f64) -> Self {
        Link {
            length,
            mass,
            com: 0.5 * length,
            inertia: mass * length * length / 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarArm {
    pub links: [Link; JOINTS],
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 2],
}

fn default_gravity() -> [f64; 2] {
    [0.0, -9.81]
}

impl Default for PlanarArm {
    fn default() -> Self {
        PlanarArm {
            links: [Link::rod(1.0, 1.0); JOINTS],
            gravity: default_gravity(),
        }
    }
}

/// Everything task-space control needs at one configuration.
#[derive(Debug, Clone)]
pub struct ArmDynamics {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    /// `C(q, q̇) q̇`
    pub coriolis_qd: DVector<f64>,
    pub gravity: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub jacobian_dot: DMatrix<f64>,
}

struct Angles {
    theta: [f64; JOINTS],
    omega: [f64; JOINTS],
}

impl Angles {
    fn new(q: &[f64], qd: &[f64]) -> Self {
        let mut theta = [0.0; JOINTS];
        let mut omega = [0.0; JOINTS];
        let (mut t, mut w) = (0.0, 0.0);
        for i in 0..JOINTS {
            t += q[i];
            w += qd[i];
            theta[i] = t;
            omega[i] = w;
        }
        Angles { theta, omega }
    }
}

impl PlanarArm {
    pub fn validate(&self) -> Result<(), String> {
        for (i, l) in self.links.iter().enumerate() {
            if !(l.length > 0.0 && l.mass > 0.0 && l.inertia >= 0.0) {
                return Err(format!("link {i}: length and mass must be > 0, inertia >= 0"));
            }
        }
        Ok(())
    }

    fn gravity_vec(&self) -> Vector2<f64> {
        Vector2::new(self.gravity[0], self.gravity[1])
    }

    /// Position of a point `offset` along link `link` (0-based).
    fn point(&self, a: &Angles, link: usize, offset: f64) -> Vector2<f64> {
        let mut p = Vector2::zeros();
        for j in 0..link {
            p += self.links[j].length * Vector2::new(a.theta[j].cos(), a.theta[j].sin());
        }
        p + offset * Vector2::new(a.theta[link].cos(), a.theta[link].sin())
    }

    /// Positional Jacobian of that point and its time derivative.
    fn point_jacobian(&self, a: &Angles, link: usize, offset: f64) -> (Matrix2x3<f64>, Matrix2x3<f64>) {
        let mut jac = Matrix2x3::zeros();
        let mut jac_dot = Matrix2x3::zeros();
        for k in 0..=link {
            let mut col = Vector2::zeros();
            let mut col_dot = Vector2::zeros();
            for j in k..=link {
                let r = if j == link { offset } else { self.links[j].length };
                let (s, c) = a.theta[j].sin_cos();
                col += r * Vector2::new(-s, c);
                col_dot -= r * a.omega[j] * Vector2::new(c, s);
            }
            jac.set_column(k, &col);
            jac_dot.set_column(k, &col_dot);
        }
        (jac, jac_dot)
    }

    pub fn end_effector(&self, q: &[f64]) -> Vector2<f64> {
        let a = Angles::new(q, &[0.0; JOINTS]);
        self.point(&a, JOINTS - 1, self.links[JOINTS - 1].length)
    }

    pub fn end_effector_velocity(&self, q: &[f64], qd: &[f64]) -> Vector2<f64> {
        let a = Angles::new(q, qd);
        let (j, _) = self.point_jacobian(&a, JOINTS - 1, self.links[JOINTS - 1].length);
        j * Vector3::from_column_slice(qd)
    }

    pub fn jacobian(&self, q: &[f64], qd: &[f64]) -> (Matrix2x3<f64>, Matrix2x3<f64>) {
        let a = Angles::new(q, qd);
        self.point_jacobian(&a, JOINTS - 1, self.links[JOINTS - 1].length)
    }

    pub fn mass_matrix(&self, q: &[f64]) -> Matrix3<f64> {
        let a = Angles::new(q, &[0.0; JOINTS]);
        let mut m = Matrix3::zeros();
        for (i, l) in self.links.iter().enumerate() {
            let (jc, _) = self.point_jacobian(&a, i, l.com);
            m += l.mass * jc.transpose() * jc;
            let jw = Vector3::from_fn(|k, _| if k <= i { 1.0 } else { 0.0 });
            m += l.inertia * jw * jw.transpose();
        }
        m
    }

    pub fn potential_energy(&self, q: &[f64]) -> f64 {
        let a = Angles::new(q, &[0.0; JOINTS]);
        let g = self.gravity_vec();
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| -l.mass * g.dot(&self.point(&a, i, l.com)))
            .sum()
    }

    pub fn kinetic_energy(&self, q: &[f64], qd: &[f64]) -> f64 {
        let v = Vector3::from_column_slice(qd);
        0.5 * (v.transpose() * self.mass_matrix(q) * v)[0]
    }

    pub fn dynamics(&self, q: &[f64], qd: &[f64]) -> ArmDynamics {
        let a = Angles::new(q, qd);
        let g = self.gravity_vec();
        let qd_v = Vector3::from_column_slice(qd);
        let mut m = Matrix3::zeros();
        let mut c = Matrix3::zeros();
        let mut grav = Vector3::zeros();
        for (i, l) in self.links.iter().enumerate() {
            let (jc, jc_dot) = self.point_jacobian(&a, i, l.com);
            m += l.mass * jc.transpose() * jc;
            let jw = Vector3::from_fn(|k, _| if k <= i { 1.0 } else { 0.0 });
            m += l.inertia * jw * jw.transpose();
            // Planar links: rotational terms carry no velocity product.
            c += l.mass * jc.transpose() * jc_dot;
            grav -= l.mass * jc.transpose() * g;
        }
        let (j, j_dot) = self.point_jacobian(&a, JOINTS - 1, self.links[JOINTS - 1].length);
        let c_qd = c * qd_v;
        ArmDynamics {
            mass: to_dmatrix(&m),
            coriolis: to_dmatrix(&c),
            coriolis_qd: DVector::from_column_slice(c_qd.as_slice()),
            gravity: DVector::from_column_slice(grav.as_slice()),
            jacobian: to_dmatrix(&j),
            jacobian_dot: to_dmatrix(&j_dot),
        }
    }

    /// Joint accelerations `M^-1 (τ - C q̇ - G)`.
    ///
    /// M is positive definite for any finite state; a non-finite state yields
    /// NaN accelerations, which the integrator reports as a blow-up.
    pub fn forward_dynamics(&self, q: &[f64], qd: &[f64], tau: &[f64]) -> DVector<f64> {
        let d = self.dynamics(q, qd);
        let rhs = DVector::from_column_slice(tau) - &d.coriolis_qd - &d.gravity;
        match d.mass.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => DVector::from_element(JOINTS, f64::NAN),
        }
    }
}

/// Free-function form of [`PlanarArm::dynamics`].
pub fn arm_dynamics(arm: &PlanarArm, q: &[f64], qd: &[f64]) -> ArmDynamics {
    arm.dynamics(q, qd)
}

fn to_dmatrix<R: nalgebra::Dim, C: nalgebra::Dim, S>(m: &nalgebra::Matrix<f64, R, C, S>) -> DMatrix<f64>
where
    S: nalgebra::RawStorage<f64, R, C>,
{
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(rng: &mut ChaCha8Rng) -> [f64; 3] {
        [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]
    }

    #[test]
    fn stretched_jacobian() {
        let arm = PlanarArm::default();
        let d = arm.dynamics(&[0.0; 3], &[0.0; 3]);
        let expected = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 3.0, 2.0, 1.0]);
        assert!((d.jacobian - expected).norm() < 1e-15);
    }

    #[test]
    fn coriolis_vanishes_at_rest() {
        let arm = PlanarArm::default();
        let d = arm.dynamics(&[0.3, -0.7, 1.1], &[0.0; 3]);
        assert_eq!(d.coriolis_qd.norm(), 0.0);
    }

    #[test]
    fn gravity_at_stretch() {
        // Finite-difference of the potential (mpmath): (44.145, 19.62, 4.905).
        let arm = PlanarArm::default();
        let g = arm.dynamics(&[0.0; 3], &[0.0; 3]).gravity;
        assert_relative_eq!(g[0], 44.145, max_relative = 1e-12);
        assert_relative_eq!(g[1], 19.62, max_relative = 1e-12);
        assert_relative_eq!(g[2], 4.905, max_relative = 1e-12);
    }

    #[test]
    fn gravity_is_potential_gradient() {
        let arm = PlanarArm::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let q = random_q(&mut rng);
            let g = arm.dynamics(&q, &[0.0; 3]).gravity;
            for k in 0..3 {
                let h = 1e-6;
                let mut qp = q;
                let mut qm = q;
                qp[k] += h;
                qm[k] -= h;
                let fd = (arm.potential_energy(&qp) - arm.potential_energy(&qm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-7, "joint {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn mass_matrix_positive_definite() {
        let arm = PlanarArm::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = arm.mass_matrix(&random_q(&mut rng));
            assert!((m - m.transpose()).norm() < 1e-14);
            let min = m.symmetric_eigenvalues().min();
            assert!(min > 0.0);
        }
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let arm = PlanarArm::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let q = random_q(&mut rng);
            let (j, _) = arm.jacobian(&q, &[0.0; 3]);
            for k in 0..3 {
                let h = 1e-6;
                let mut qp = q;
                let mut qm = q;
                qp[k] += h;
                qm[k] -= h;
                let fd = (arm.end_effector(&qp) - arm.end_effector(&qm)) / (2.0 * h);
                assert!((fd - j.column(k)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn jacobian_dot_matches_finite_difference_along_trajectory() {
        let arm = PlanarArm::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let q = random_q(&mut rng);
            let qd = random_q(&mut rng);
            let h = 1e-6;
            let step = |s: f64| -> [f64; 3] { [q[0] + s * qd[0], q[1] + s * qd[1], q[2] + s * qd[2]] };
            let (_, jd) = arm.jacobian(&q, &qd);
            let (jp, _) = arm.jacobian(&step(h), &qd);
            let (jm, _) = arm.jacobian(&step(-h), &qd);
            let fd = (jp - jm) / (2.0 * h);
            assert!((fd - jd).norm() < 1e-4);
        }
    }

    #[test]
    fn mdot_minus_two_c_is_skew() {
        let arm = PlanarArm::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let q = random_q(&mut rng);
            let qd = random_q(&mut rng);
            let h = 1e-6;
            let qp: Vec<f64> = (0..3).map(|i| q[i] + h * qd[i]).collect();
            let qm: Vec<f64> = (0..3).map(|i| q[i] - h * qd[i]).collect();
            let m_dot = (arm.mass_matrix(&qp) - arm.mass_matrix(&qm)) / (2.0 * h);
            let c = arm.dynamics(&q, &qd).coriolis;
            let s = to_dmatrix(&m_dot) - 2.0 * c;
            assert!((&s + s.transpose()).norm() < 1e-6);
        }
    }

    #[test]
    fn coriolis_matches_lagrangian_identity() {
        // C q̇ = Ṁ q̇ - ½ ∂(q̇ᵀ M q̇)/∂q
        let arm = PlanarArm::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let q = random_q(&mut rng);
            let qd = random_q(&mut rng);
            let qdv = Vector3::from_column_slice(&qd);
            let h = 1e-6;
            let qp: Vec<f64> = (0..3).map(|i| q[i] + h * qd[i]).collect();
            let qm: Vec<f64> = (0..3).map(|i| q[i] - h * qd[i]).collect();
            let m_dot = (arm.mass_matrix(&qp) - arm.mass_matrix(&qm)) / (2.0 * h);
            let mut grad = Vector3::zeros();
            for k in 0..3 {
                let mut a = q;
                let mut b = q;
                a[k] += h;
                b[k] -= h;
                grad[k] = (arm.kinetic_energy(&a, &qd) - arm.kinetic_energy(&b, &qd)) / (2.0 * h);
            }
            let expected = m_dot * qdv - grad;
            let got = arm.dynamics(&q, &qd).coriolis_qd;
            for k in 0..3 {
                assert!((expected[k] - got[k]).abs() < 1e-5);
            }
        }
    }
}
