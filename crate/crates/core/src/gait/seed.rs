//! Task-space seed construction for the walking gait: pick a step geometry,
//! trace consistent hip and swing-foot paths, and convert them into Bezier
//! output coefficients plus a matching fixed point.

use nalgebra::Vector2;

use crate::error::Result;
use crate::params::RobotParams;
use crate::state::{SsState, Vec5};

use super::ik::ss_config_from_task;
use super::outputs::{eval_phase, PhaseVariable};
use super::GaitSpec;

/// Geometric knobs of the seed gait.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeedGeometry {
    /// Step length: horizontal distance between consecutive footprints (m).
    pub step_length: f64,
    /// Hip height along the step (m).
    pub hip_height: f64,
    /// Peak swing-foot clearance (m).
    pub clearance: f64,
    /// Torso angle held through the seed gait (rad).
    pub torso_angle: f64,
    /// Forward hip speed at the start of the step (m/s).
    pub hip_speed: f64,
    /// Hip advance allotted to the double-support phase (m); the
    /// single-support phase starts this far past the mirrored start point.
    pub ds_advance: f64,
    /// Bezier degree of the desired outputs.
    pub degree: usize,
}

impl Default for SeedGeometry {
    fn default() -> Self {
        Self {
            step_length: 0.16,
            hip_height: 0.44,
            clearance: 0.04,
            torso_angle: 0.0,
            hip_speed: 0.45,
            ds_advance: 0.0045,
            degree: 5,
        }
    }
}

/// Smooth swing progression with zero slope at both ends.
fn swing_progress(s: f64) -> f64 {
    s - (2.0 * std::f64::consts::PI * s).sin() / (2.0 * std::f64::consts::PI)
}

/// Swing-foot height bump: flat start (so the fixed point has a stationary
/// swing foot, reachable from double support) and a strictly descending end
/// (so touchdown is transversal). Peak value = clearance at s = 2/3.
fn swing_bump(s: f64, clearance: f64) -> f64 {
    6.75 * clearance * s * s * (1.0 - s)
}

/// Build a seed gait: Bezier outputs matching an IK-generated task path with
/// exact endpoint values and slopes, and the manifold-consistent fixed point
/// `x_s0`.
pub fn build_seed_spec(
    p: &RobotParams,
    geo: &SeedGeometry,
    kp: [f64; 4],
    kd: [f64; 4],
) -> Result<GaitSpec> {
    let s_len = geo.step_length;
    let theta_plus = 0.5 * s_len;
    let theta_minus = -0.5 * s_len + geo.ds_advance;

    let task_config = |s: f64| -> Result<crate::state::Vec5> {
        let hip = Vector2::new(theta_minus + s * (theta_plus - theta_minus), geo.hip_height);
        let swing = Vector2::new(
            -s_len + 2.0 * s_len * swing_progress(s),
            swing_bump(s, geo.clearance),
        );
        ss_config_from_task(hip, swing, geo.torso_angle, p)
    };

    // Degree-5 rows: pin values at four nodes and the slopes at both ends so
    // the fixed point's swing-foot velocity is exactly zero on the manifold.
    if geo.degree != 5 {
        return Err(crate::error::Error::Config(
            "seed construction supports degree 5".into(),
        ));
    }
    let value_nodes = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    let eps = 1e-6;
    let mut rows_rhs = vec![Vec::with_capacity(6); 4];
    for &s in &value_nodes {
        let q = task_config(s)?;
        for (row, &idx) in crate::state::ACTUATED.iter().enumerate() {
            rows_rhs[row].push(q[idx]);
        }
    }
    for &s in &[0.0, 1.0] {
        let qp_ = task_config(s + eps)?;
        let qm_ = task_config(s - eps)?;
        for (row, &idx) in crate::state::ACTUATED.iter().enumerate() {
            rows_rhs[row].push((qp_[idx] - qm_[idx]) / (2.0 * eps));
        }
    }
    let bezier: Vec<Vec<f64>> = rows_rhs
        .iter()
        .map(|rhs| fit_with_end_slopes(&value_nodes, rhs))
        .collect();

    let mut spec = GaitSpec {
        version: 1,
        phase_variable: PhaseVariable::HipX,
        theta_range: [theta_minus, theta_plus],
        kp,
        kd,
        bezier,
        x_s0_q: [0.0; 5],
        x_s0_dq: [0.0; 5],
    };

    // Fixed point: configuration at s = 0, velocities on the zero-output
    // manifold with the requested phase rate.
    let hip0 = Vector2::new(theta_minus, geo.hip_height);
    let swing0 = Vector2::new(-s_len, 0.0);
    let q0 = ss_config_from_task(hip0, swing0, geo.torso_angle, p)?;
    let dq0 = manifold_velocity(&spec, p, &q0, geo.hip_speed)?;
    for i in 0..5 {
        spec.x_s0_q[i] = q0[i];
        spec.x_s0_dq[i] = dq0[i];
    }
    spec.validate()?;
    Ok(spec)
}

/// Solve for degree-5 Bezier coefficients from four value conditions plus
/// the two endpoint slopes (rhs layout: values then slopes).
fn fit_with_end_slopes(value_nodes: &[f64; 4], rhs: &[f64]) -> Vec<f64> {
    let bernstein = |i: usize, s: f64| -> f64 {
        let binom = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0][i];
        binom * s.powi(i as i32) * (1.0 - s).powi(5 - i as i32)
    };
    let mut a = nalgebra::DMatrix::<f64>::zeros(6, 6);
    for (r, &s) in value_nodes.iter().enumerate() {
        for i in 0..6 {
            a[(r, i)] = bernstein(i, s);
        }
    }
    // d/ds at s = 0: 5 (c1 - c0); at s = 1: 5 (c5 - c4)
    a[(4, 0)] = -5.0;
    a[(4, 1)] = 5.0;
    a[(5, 4)] = -5.0;
    a[(5, 5)] = 5.0;
    let b = nalgebra::DVector::from_column_slice(rhs);
    let sol = a.lu().solve(&b).expect("end-slope collocation is invertible");
    sol.iter().copied().collect()
}

/// Velocity vector on the zero-output manifold at configuration `q` with the
/// given phase rate: `dq_b = h_d'(s) * s_rate` and the torso rate chosen so
/// the phase rate is self-consistent.
pub fn manifold_velocity(
    spec: &GaitSpec,
    p: &RobotParams,
    q: &Vec5,
    theta_rate: f64,
) -> Result<Vec5> {
    let state = SsState::new(*q, Vec5::zeros());
    let ev = eval_phase(&state, spec.phase_variable, p);
    let span = spec.theta_range[1] - spec.theta_range[0];
    let s = ((ev.theta - spec.theta_range[0]) / span).clamp(0.0, 1.0);
    let hd1 = spec.bezier_set().eval_derivative(s);
    let s_rate = theta_rate / span;
    let mut dq = Vec5::zeros();
    for (row, &idx) in crate::state::ACTUATED.iter().enumerate() {
        dq[idx] = hd1[row] * s_rate;
    }
    // consistency: grad . dq must equal theta_rate; solve for the torso rate
    let partial: f64 = (1..5).map(|i| ev.grad[i] * dq[i]).sum();
    if ev.grad[0].abs() < 1e-9 {
        return Err(crate::error::Error::Precondition(
            "phase gradient w.r.t. torso vanishes; cannot complete manifold velocity".into(),
        ));
    }
    dq[0] = (theta_rate - partial) / ev.grad[0];
    Ok(dq)
}
