//! Planar chain kinematics for the point-mass biped.
//!
//! Every material point of the robot is a sum of link segments. A segment of
//! signed length `l` at absolute angle `theta` contributes `l * dir(theta)`
//! with `dir(theta) = [sin theta, -cos theta]` (a unit leg link hangs straight
//! down at `theta = 0`; the torso is a negative-length segment so it points
//! up). Absolute angles are sums of joint coordinates, so positions, Jacobians
//! and the `Jdot * qdot` terms all come out of one accumulation pass with no
//! numerical differentiation.

use nalgebra::{SMatrix, SVector, Vector2};

use crate::params::RobotParams;

/// Absolute link angle: value, rate, and the coordinates it sums over.
#[derive(Debug, Clone, Copy)]
pub struct Angle {
    pub val: f64,
    pub rate: f64,
    pub coords: &'static [usize],
}

impl Angle {
    fn from_coords<const N: usize>(
        q: &SVector<f64, N>,
        dq: &SVector<f64, N>,
        coords: &'static [usize],
    ) -> Self {
        let mut val = 0.0;
        let mut rate = 0.0;
        for &j in coords {
            val += q[j];
            rate += dq[j];
        }
        Self { val, rate, coords }
    }
}

/// Position, Jacobian and `Jdot * qdot` of one material point.
#[derive(Debug, Clone)]
pub struct PointKin<const N: usize> {
    pub pos: Vector2<f64>,
    pub jac: SMatrix<f64, 2, N>,
    pub jdq: Vector2<f64>,
}

impl<const N: usize> PointKin<N> {
    pub fn at_origin() -> Self {
        Self {
            pos: Vector2::zeros(),
            jac: SMatrix::zeros(),
            jdq: Vector2::zeros(),
        }
    }

    /// Base point carried by two translational coordinates (the hip).
    pub fn at_coords(q: &SVector<f64, N>, ix: usize, iy: usize) -> Self {
        let mut jac = SMatrix::<f64, 2, N>::zeros();
        jac[(0, ix)] = 1.0;
        jac[(1, iy)] = 1.0;
        Self {
            pos: Vector2::new(q[ix], q[iy]),
            jac,
            jdq: Vector2::zeros(),
        }
    }

    /// Append a segment of signed length `len` at absolute angle `ang`.
    pub fn add_segment(&mut self, len: f64, ang: &Angle) {
        let (s, c) = ang.val.sin_cos();
        let dir = Vector2::new(s, -c);
        let perp = Vector2::new(c, s); // d(dir)/d(theta)
        self.pos += len * dir;
        for &j in ang.coords {
            self.jac[(0, j)] += len * perp.x;
            self.jac[(1, j)] += len * perp.y;
        }
        self.jdq += -len * ang.rate * ang.rate * dir;
    }

    pub fn velocity(&self, dq: &SVector<f64, N>) -> Vector2<f64> {
        self.jac * dq
    }
}

/// Joint-coordinate index sets for the five absolute link angles.
/// Layout: `[q_T, q_1R, q_1L, q_2R, q_2L, (p_Hx, p_Hy)]`.
pub const TORSO: &[usize] = &[0];
pub const FEMUR_R: &[usize] = &[0, 1];
pub const FEMUR_L: &[usize] = &[0, 2];
pub const TIBIA_R: &[usize] = &[0, 1, 3];
pub const TIBIA_L: &[usize] = &[0, 2, 4];

/// All link angles evaluated at a state.
pub struct LinkAngles {
    pub torso: Angle,
    pub femur_r: Angle,
    pub femur_l: Angle,
    pub tibia_r: Angle,
    pub tibia_l: Angle,
}

impl LinkAngles {
    pub fn eval<const N: usize>(q: &SVector<f64, N>, dq: &SVector<f64, N>) -> Self {
        Self {
            torso: Angle::from_coords(q, dq, TORSO),
            femur_r: Angle::from_coords(q, dq, FEMUR_R),
            femur_l: Angle::from_coords(q, dq, FEMUR_L),
            tibia_r: Angle::from_coords(q, dq, TIBIA_R),
            tibia_l: Angle::from_coords(q, dq, TIBIA_L),
        }
    }
}

/// The four point masses of the robot, each with its kinematics.
pub struct MassPoints<const N: usize> {
    /// (mass, kinematics) for torso, hip, right knee, left knee.
    pub points: [(f64, PointKin<N>); 4],
    /// Hip point kinematics (massless reference for COM/phase computations).
    pub hip: PointKin<N>,
}

/// Material points of the pinned single-support model (stance foot = right
/// foot at the origin, N = 5).
pub fn ss_mass_points(
    q: &SVector<f64, 5>,
    dq: &SVector<f64, 5>,
    p: &RobotParams,
) -> MassPoints<5> {
    let ang = LinkAngles::eval(q, dq);
    let mut hip = PointKin::at_origin();
    hip.add_segment(-p.l_2a, &ang.tibia_r);
    hip.add_segment(-p.l_1, &ang.femur_r);
    mass_points_from_hip(hip, &ang, p)
}

/// Material points of the extended (free hip) model, N = 7.
pub fn ext_mass_points(
    q: &SVector<f64, 7>,
    dq: &SVector<f64, 7>,
    p: &RobotParams,
) -> MassPoints<7> {
    let ang = LinkAngles::eval(q, dq);
    let hip = PointKin::at_coords(q, 5, 6);
    mass_points_from_hip(hip, &ang, p)
}

fn mass_points_from_hip<const N: usize>(
    hip: PointKin<N>,
    ang: &LinkAngles,
    p: &RobotParams,
) -> MassPoints<N> {
    let mut torso = hip.clone();
    torso.add_segment(-p.l_t, &ang.torso);

    // Each leg mass sits at the tibia midpoint so that every joint
    // coordinate carries inertia and the inertia matrix stays positive
    // definite away from full leg extension.
    let mut leg_r = hip.clone();
    leg_r.add_segment(p.l_1, &ang.femur_r);
    leg_r.add_segment(0.5 * p.l_2a, &ang.tibia_r);

    let mut leg_l = hip.clone();
    leg_l.add_segment(p.l_1, &ang.femur_l);
    leg_l.add_segment(0.5 * p.l_2a, &ang.tibia_l);

    MassPoints {
        points: [
            (p.m_t, torso),
            (p.m_h, hip.clone()),
            (p.m_k, leg_r),
            (p.m_k, leg_l),
        ],
        hip,
    }
}

/// Foot-end kinematics relative to a hip point.
pub fn foot_from_hip<const N: usize>(
    hip: &PointKin<N>,
    femur: &Angle,
    tibia: &Angle,
    p: &RobotParams,
) -> PointKin<N> {
    let mut foot = hip.clone();
    foot.add_segment(p.l_1, femur);
    foot.add_segment(p.l_2a, tibia);
    foot
}

/// Swing (left) foot kinematics in single-support coordinates.
pub fn ss_swing_foot(q: &SVector<f64, 5>, dq: &SVector<f64, 5>, p: &RobotParams) -> PointKin<5> {
    let ang = LinkAngles::eval(q, dq);
    let mut hip = PointKin::at_origin();
    hip.add_segment(-p.l_2a, &ang.tibia_r);
    hip.add_segment(-p.l_1, &ang.femur_r);
    foot_from_hip(&hip, &ang.femur_l, &ang.tibia_l, p)
}

/// Hip kinematics in single-support coordinates (stance foot at the origin).
pub fn ss_hip(q: &SVector<f64, 5>, dq: &SVector<f64, 5>, p: &RobotParams) -> PointKin<5> {
    let ang = LinkAngles::eval(q, dq);
    let mut hip = PointKin::at_origin();
    hip.add_segment(-p.l_2a, &ang.tibia_r);
    hip.add_segment(-p.l_1, &ang.femur_r);
    hip
}

/// Both foot ends in extended coordinates: right then left.
pub fn ext_feet(
    q: &SVector<f64, 7>,
    dq: &SVector<f64, 7>,
    p: &RobotParams,
) -> (PointKin<7>, PointKin<7>) {
    let ang = LinkAngles::eval(q, dq);
    let hip = PointKin::at_coords(q, 5, 6);
    let foot_r = foot_from_hip(&hip, &ang.femur_r, &ang.tibia_r, p);
    let foot_l = foot_from_hip(&hip, &ang.femur_l, &ang.tibia_l, p);
    (foot_r, foot_l)
}

/// Torso-point kinematics and the unit thrust direction in extended
/// coordinates. The thrust vector is fixed along the torso link and presses
/// the robot toward the ground (torso point toward hip): straight down when
/// the torso is upright. Only its magnitude is commanded.
pub fn ext_torso_and_thrust_dir(
    q: &SVector<f64, 7>,
    dq: &SVector<f64, 7>,
    p: &RobotParams,
) -> (PointKin<7>, Vector2<f64>) {
    let ang = LinkAngles::eval(q, dq);
    let hip = PointKin::at_coords(q, 5, 6);
    let mut torso = hip;
    torso.add_segment(-p.l_t, &ang.torso);
    let (s, c) = q[0].sin_cos();
    (torso, Vector2::new(s, -c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SVector;

    fn params() -> RobotParams {
        RobotParams::default()
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = params();
        let q = SVector::<f64, 7>::from_row_slice(&[0.1, 0.2, -0.3, 0.4, -0.5, 0.6, 0.7]);
        let dq = SVector::<f64, 7>::zeros();
        let (foot_r, _) = ext_feet(&q, &dq, &p);
        let eps = 1e-7;
        for j in 0..7 {
            let mut qp = q;
            let mut qm = q;
            qp[j] += eps;
            qm[j] -= eps;
            let (fp, _) = ext_feet(&qp, &dq, &p);
            let (fm, _) = ext_feet(&qm, &dq, &p);
            let fd = (fp.pos - fm.pos) / (2.0 * eps);
            assert_relative_eq!(foot_r.jac[(0, j)], fd.x, epsilon = 1e-6);
            assert_relative_eq!(foot_r.jac[(1, j)], fd.y, epsilon = 1e-6);
        }
    }

    #[test]
    fn jdq_matches_finite_differences_of_velocity() {
        // Jdot*qdot = d/dt (J qdot) - J qddot; along a constant-velocity
        // coordinate path qddot = 0, so it is the time derivative of J*qdot.
        let p = params();
        let q = SVector::<f64, 7>::from_row_slice(&[0.3, -0.2, 0.5, 0.7, -0.4, 0.1, 0.9]);
        let dq = SVector::<f64, 7>::from_row_slice(&[0.4, -1.2, 0.8, 0.5, -0.3, 0.2, -0.6]);
        let (foot_r, _) = ext_feet(&q, &dq, &p);
        let eps = 1e-6;
        let qp = q + dq * eps;
        let qm = q - dq * eps;
        let (fp, _) = ext_feet(&qp, &dq, &p);
        let (fm, _) = ext_feet(&qm, &dq, &p);
        let fd = (fp.velocity(&dq) - fm.velocity(&dq)) / (2.0 * eps);
        assert_relative_eq!(foot_r.jdq.x, fd.x, epsilon = 1e-5);
        assert_relative_eq!(foot_r.jdq.y, fd.y, epsilon = 1e-5);
    }

    #[test]
    fn pinned_stance_foot_is_stationary() {
        let p = params();
        let q = SVector::<f64, 5>::from_row_slice(&[0.1, 0.2, -0.3, 0.4, -0.5]);
        let dq = SVector::<f64, 5>::from_row_slice(&[1.0, -2.0, 0.5, 0.3, -0.7]);
        // Reconstruct the stance foot from the hip: it must sit at the origin
        // with zero velocity for any state.
        let ang = LinkAngles::eval(&q, &dq);
        let hip = ss_hip(&q, &dq, &p);
        let foot = foot_from_hip(&hip, &ang.femur_r, &ang.tibia_r, &p);
        assert!(foot.pos.norm() < 1e-15);
        assert!(foot.velocity(&dq).norm() < 1e-15);
        assert!(foot.jdq.norm() < 1e-15);
    }

    #[test]
    fn torso_points_up_at_zero_angle() {
        let p = params();
        let q = SVector::<f64, 7>::zeros();
        let dq = SVector::<f64, 7>::zeros();
        let (torso, t_dir) = ext_torso_and_thrust_dir(&q, &dq, &p);
        assert_relative_eq!(torso.pos.y, p.l_t, epsilon = 1e-15);
        assert_relative_eq!(torso.pos.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(t_dir.x, 0.0);
        assert_relative_eq!(t_dir.y, -1.0);
    }
}
