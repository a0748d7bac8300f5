//! Two-link leg inverse kinematics and configuration builders used for gait
//! seeding and test fixtures.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::params::RobotParams;
use crate::state::{Vec5, Vec7};

/// Joint angles `(q_1, q_2)` placing the foot end at `foot` for a hip at
/// `hip` and torso angle `q_t`. Uses the knee-behind branch (`q_2 > 0` for
/// poses with the foot roughly below the hip).
pub fn leg_ik(
    hip: Vector2<f64>,
    foot: Vector2<f64>,
    q_t: f64,
    p: &RobotParams,
) -> Result<(f64, f64)> {
    let r = foot - hip;
    let d = r.norm();
    let reach = p.l_1 + p.l_2a;
    if d >= reach {
        return Err(Error::Precondition(format!(
            "foot target out of reach: d = {d:.4} >= {reach:.4}"
        )));
    }
    if d <= (p.l_1 - p.l_2a).abs() {
        return Err(Error::Precondition(format!(
            "foot target inside annulus: d = {d:.4}"
        )));
    }
    // Absolute angle of the hip-to-foot line in the link convention
    // dir(theta) = [sin theta, -cos theta].
    let phi = r.x.atan2(-r.y);
    let cos_alpha = (p.l_1 * p.l_1 + d * d - p.l_2a * p.l_2a) / (2.0 * p.l_1 * d);
    let alpha = cos_alpha.clamp(-1.0, 1.0).acos();
    let theta1 = phi - alpha;
    let (s1, c1) = theta1.sin_cos();
    let knee = hip + p.l_1 * Vector2::new(s1, -c1);
    let shank = foot - knee;
    let theta2 = shank.x.atan2(-shank.y);
    let q1 = theta1 - q_t;
    let mut q2 = theta2 - theta1;
    // principal value
    while q2 > std::f64::consts::PI {
        q2 -= 2.0 * std::f64::consts::PI;
    }
    while q2 < -std::f64::consts::PI {
        q2 += 2.0 * std::f64::consts::PI;
    }
    Ok((q1, q2))
}

/// Single-support configuration from task quantities: hip position relative
/// to the stance foot (at the origin), swing-foot position, torso angle.
pub fn ss_config_from_task(
    hip: Vector2<f64>,
    swing_foot: Vector2<f64>,
    q_t: f64,
    p: &RobotParams,
) -> Result<Vec5> {
    let (q1r, q2r) = leg_ik(hip, Vector2::zeros(), q_t, p)?;
    let (q1l, q2l) = leg_ik(hip, swing_foot, q_t, p)?;
    Ok(Vec5::from_row_slice(&[q_t, q1r, q1l, q2r, q2l]))
}

/// Symmetric double-stance configuration: feet at `(+-half_spread, 0)`,
/// hip at `(0, hip_height)`, torso vertical.
pub fn symmetric_stance(hip_height: f64, half_spread: f64, p: &RobotParams) -> Result<Vec7> {
    let hip = Vector2::new(0.0, hip_height);
    let (q1r, q2r) = leg_ik(hip, Vector2::new(half_spread, 0.0), 0.0, p)?;
    let (q1l, q2l) = leg_ik(hip, Vector2::new(-half_spread, 0.0), 0.0, p)?;
    Ok(Vec7::from_row_slice(&[
        0.0, q1r, q1l, q2r, q2l, 0.0, hip_height,
    ]))
}
