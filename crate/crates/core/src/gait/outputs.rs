//! Phase variable, HZD outputs `y = q_b - h_d(theta)` and the
//! feedback-linearizing tracking controller.

use nalgebra::{Matrix4, SMatrix};

use crate::error::{Error, Result};
use crate::model::{self, chain};
use crate::params::RobotParams;
use crate::state::{SsState, Vec4, Vec5, ACTUATED};

use super::GaitSpec;

/// Choice of the monotone phase variable parameterizing the gait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseVariable {
    /// Horizontal hip position relative to the stance foot (default).
    HipX,
    /// Lean angle of the stance-foot-to-hip line from vertical.
    StanceLegAngle,
}

/// Phase value with everything needed for chain-ruling through it.
#[derive(Debug, Clone)]
pub struct PhaseEval {
    pub theta: f64,
    pub dtheta: f64,
    /// Gradient d(theta)/dq.
    pub grad: Vec5,
    /// Acceleration of theta at zero joint acceleration (quadratic term).
    pub quad: f64,
}

pub fn eval_phase(state: &SsState, which: PhaseVariable, p: &RobotParams) -> PhaseEval {
    let hip = chain::ss_hip(&state.q, &state.dq, p);
    match which {
        PhaseVariable::HipX => PhaseEval {
            theta: hip.pos.x,
            dtheta: hip.jac.row(0).dot(&state.dq.transpose()),
            grad: hip.jac.row(0).transpose(),
            quad: hip.jdq.x,
        },
        PhaseVariable::StanceLegAngle => {
            let (x, y) = (hip.pos.x, hip.pos.y);
            let r2 = x * x + y * y;
            let gx = hip.jac.row(0).transpose();
            let gy = hip.jac.row(1).transpose();
            let grad = (y * gx - x * gy) / r2;
            let vx = hip.jac.row(0).dot(&state.dq.transpose());
            let vy = hip.jac.row(1).dot(&state.dq.transpose());
            let dtheta = (y * vx - x * vy) / r2;
            let quad = (y * hip.jdq.x - x * hip.jdq.y) / r2
                - dtheta * 2.0 * (x * vx + y * vy) / r2;
            PhaseEval {
                theta: x.atan2(y),
                dtheta,
                grad,
                quad,
            }
        }
    }
}

/// The phase variable, its normalized value `s` in [0, 1] and its rate.
pub fn phase_variable(state: &SsState, spec: &GaitSpec, p: &RobotParams) -> (f64, f64, f64) {
    let ev = eval_phase(state, spec.phase_variable, p);
    let span = spec.theta_range[1] - spec.theta_range[0];
    let s = ((ev.theta - spec.theta_range[0]) / span).clamp(0.0, 1.0);
    (ev.theta, s, ev.dtheta)
}

/// Outputs and the Lie-derivative data of the relative-degree-two
/// input-output map.
#[derive(Debug, Clone)]
pub struct OutputData {
    pub y: Vec4,
    pub dy: Vec4,
    /// Drift part of the output acceleration (value of `y_ddot` at `u = 0`).
    pub lf2h: Vec4,
    /// Decoupling matrix: `y_ddot = lf2h + lglfh * u`.
    pub lglfh: Matrix4<f64>,
    /// Condition number of the decoupling matrix.
    pub cond: f64,
    /// Normalized phase at evaluation.
    pub s: f64,
}

pub fn output_and_derivatives(
    state: &SsState,
    spec: &GaitSpec,
    p: &RobotParams,
) -> Result<OutputData> {
    state.check_finite()?;
    let ev = eval_phase(state, spec.phase_variable, p);
    let span = spec.theta_range[1] - spec.theta_range[0];
    let sigma = (ev.theta - spec.theta_range[0]) / span;
    let s = sigma.clamp(0.0, 1.0);

    let bez = spec.bezier_set();
    // The desired trajectory extends C1-linearly for a short band past the
    // phase range (states land slightly outside it around the impact), and
    // freezes beyond the band.
    let band = 0.02;
    let (hd, hd1, hd2, live) = if (0.0..=1.0).contains(&sigma) {
        (bez.eval(s), bez.eval_derivative(s), bez.eval_second_derivative(s), true)
    } else if sigma > -band && sigma < 1.0 + band {
        let edge = if sigma < 0.0 { 0.0 } else { 1.0 };
        let v = bez.eval(edge);
        let d1 = bez.eval_derivative(edge);
        let extrapolated = &v + &d1 * (sigma - edge);
        (extrapolated, d1, nalgebra::DVector::zeros(4), true)
    } else {
        (
            bez.eval(s),
            bez.eval_derivative(s),
            bez.eval_second_derivative(s),
            false,
        )
    };

    let qb = state.qb();
    let dqb = state.dqb();

    let (ds_dq, s_rate, s_quad) = if live {
        (ev.grad / span, ev.dtheta / span, ev.quad / span)
    } else {
        (Vec5::zeros(), 0.0, 0.0)
    };

    let y = Vec4::from_fn(|i, _| qb[i] - hd[i]);
    let dy = Vec4::from_fn(|i, _| dqb[i] - hd1[i] * s_rate);

    // C = dy/dq (4x5)
    let mut c = SMatrix::<f64, 4, 5>::zeros();
    for (row, &col) in ACTUATED.iter().enumerate() {
        c[(row, col)] = 1.0;
    }
    for row in 0..4 {
        for col in 0..5 {
            c[(row, col)] -= hd1[row] * ds_dq[col];
        }
    }

    // drift acceleration of q and the quadratic phase terms
    let (d, h, b) = model::ss_dynamics(state, p);
    let chol = d.cholesky().ok_or_else(|| Error::Singular {
        context: "single-support inertia matrix".into(),
    })?;
    let a_drift = chol.solve(&(-h));
    let m_input = chol.solve(&b);

    let mut lf2h = c * a_drift;
    for i in 0..4 {
        lf2h[i] += -hd2[i] * s_rate * s_rate - hd1[i] * s_quad;
    }
    let lglfh = c * m_input;

    let sv = lglfh.svd(false, false).singular_values;
    let cond = sv.max() / sv.min().max(f64::MIN_POSITIVE);

    Ok(OutputData {
        y,
        dy,
        lf2h,
        lglfh,
        cond,
        s,
    })
}

/// Condition-number threshold above which the decoupling matrix is treated
/// as singular.
pub const DECOUPLING_COND_LIMIT: f64 = 1e10;

/// Feedback-linearizing tracking law `u = (LgLfh)^-1 (-Lf2h + v)` with
/// `v = -(K_P y + K_D y_dot)`, so the closed loop obeys `y_ddot = v` with
/// positive diagonal gains.
pub fn fbl_control(state: &SsState, spec: &GaitSpec, p: &RobotParams) -> Result<(Vec4, OutputData)> {
    let out = output_and_derivatives(state, spec, p)?;
    if !out.cond.is_finite() || out.cond > DECOUPLING_COND_LIMIT {
        return Err(Error::Controller(format!(
            "decoupling matrix near singular (cond = {:.3e})",
            out.cond
        )));
    }
    let v = fbl_target_accel(&out, spec);
    let rhs = -out.lf2h + v;
    let u = out
        .lglfh
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Controller("decoupling matrix solve failed".into()))?;
    Ok((u, out))
}

/// The commanded output acceleration `v = -(K_P y + K_D y_dot)`.
pub fn fbl_target_accel(out: &OutputData, spec: &GaitSpec) -> Vec4 {
    Vec4::from_fn(|i, _| -(spec.kp[i] * out.y[i] + spec.kd[i] * out.dy[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::tests::test_spec;
    use crate::hybrid::step_ss;
    use approx::assert_relative_eq;

    fn params() -> RobotParams {
        RobotParams::default()
    }

    #[test]
    fn hip_above_stance_foot_gives_zero_theta() {
        let p = params();
        let spec = test_spec(&p);
        // configuration with the hip exactly above the stance foot
        let q = crate::gait::ik::ss_config_from_task(
            nalgebra::Vector2::new(0.0, 0.44),
            nalgebra::Vector2::new(-0.15, 0.02),
            0.03,
            &p,
        )
        .unwrap();
        let s = SsState::new(q, Vec5::zeros());
        let (theta, _, _) = phase_variable(&s, &spec, &p);
        assert_relative_eq!(theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_at_fixed_point_is_theta_minus() {
        let p = params();
        let spec = test_spec(&p);
        let s = SsState::from_flat(&spec.x_s0_vector());
        let (theta, s_norm, _) = phase_variable(&s, &spec, &p);
        assert_relative_eq!(theta, spec.theta_range[0], epsilon = 1e-9);
        assert!(s_norm < 1e-6);
    }

    #[test]
    fn phase_rate_matches_finite_differences() {
        let p = params();
        let spec = test_spec(&p);
        let mut s = SsState::from_flat(&spec.x_s0_vector());
        s.dq += Vec5::from_row_slice(&[0.1, -0.05, 0.2, 0.02, -0.06]);
        let u = Vec4::zeros();
        let dt = 1e-6;
        let (theta0, _, dtheta) = phase_variable(&s, &spec, &p);
        let s1 = step_ss(&s, &u, dt, &p).unwrap();
        let (theta1, _, _) = phase_variable(&s1, &spec, &p);
        let fd = (theta1 - theta0) / dt;
        assert_relative_eq!(dtheta, fd, epsilon = 1e-6, max_relative = 1e-5);
    }

    #[test]
    fn on_manifold_outputs_vanish() {
        let p = params();
        let spec = test_spec(&p);
        let s = SsState::from_flat(&spec.x_s0_vector());
        let out = output_and_derivatives(&s, &spec, &p).unwrap();
        assert!(out.y.norm() < 1e-9, "y = {}", out.y);
        assert!(out.dy.norm() < 1e-9, "dy = {}", out.dy);
    }

    #[test]
    fn swing_coordinate_perturbation_shifts_output_directly() {
        // theta depends only on stance-side geometry, so perturbing a swing
        // coordinate changes the matching output by exactly the perturbation.
        let p = params();
        let spec = test_spec(&p);
        let s0 = SsState::from_flat(&spec.x_s0_vector());
        let out0 = output_and_derivatives(&s0, &spec, &p).unwrap();
        let delta = 0.01;
        for (k, idx) in [(1usize, 2usize), (3usize, 4usize)] {
            let mut s1 = s0;
            s1.q[idx] += delta;
            let out1 = output_and_derivatives(&s1, &spec, &p).unwrap();
            assert_relative_eq!(out1.y[k] - out0.y[k], delta, epsilon = 1e-12);
        }
    }

    /// A state with the phase well inside (0, 1) so no clamping is active.
    fn mid_phase_state(p: &RobotParams, spec: &GaitSpec) -> SsState {
        let q = crate::gait::ik::ss_config_from_task(
            nalgebra::Vector2::new(0.0, 0.438),
            nalgebra::Vector2::new(-0.03, 0.025),
            0.01,
            p,
        )
        .unwrap();
        let dq = crate::gait::seed::manifold_velocity(spec, p, &q, 0.4).unwrap();
        SsState::new(q, dq)
    }

    #[test]
    fn drift_term_matches_unforced_rollout() {
        let p = params();
        let spec = test_spec(&p);
        let mut s = mid_phase_state(&p, &spec);
        s.q[0] += 0.02;
        s.dq[1] -= 0.1;
        let out = output_and_derivatives(&s, &spec, &p).unwrap();
        // measure y_ddot by central differences along the unforced flow;
        // the backward point comes from time reversal (flip velocities)
        let dt = 1e-5;
        let u = Vec4::zeros();
        let flip = |st: &SsState| SsState::new(st.q, -st.dq);
        let fw = step_ss(&s, &u, dt, &p).unwrap();
        let bw = flip(&step_ss(&flip(&s), &u, dt, &p).unwrap());
        let y0 = output_and_derivatives(&s, &spec, &p).unwrap().y;
        let yf = output_and_derivatives(&fw, &spec, &p).unwrap().y;
        let yb = output_and_derivatives(&bw, &spec, &p).unwrap().y;
        for i in 0..4 {
            let fd = (yf[i] - 2.0 * y0[i] + yb[i]) / (dt * dt);
            assert_relative_eq!(out.lf2h[i], fd, epsilon = 1e-3, max_relative = 1e-4);
        }
    }

    #[test]
    fn closed_loop_output_acceleration_matches_command() {
        let p = params();
        let spec = test_spec(&p);
        let mut s = mid_phase_state(&p, &spec);
        s.q[2] += 0.01; // off the manifold so v is nonzero
        s.dq[3] -= 0.05;
        let (u, out) = fbl_control(&s, &spec, &p).unwrap();
        let v = fbl_target_accel(&out, &spec);
        let dt = 1e-5;
        let flip = |st: &SsState| SsState::new(st.q, -st.dq);
        let fw = step_ss(&s, &u, dt, &p).unwrap();
        let bw = flip(&step_ss(&flip(&s), &u, dt, &p).unwrap());
        let y0 = output_and_derivatives(&s, &spec, &p).unwrap().y;
        let yf = output_and_derivatives(&fw, &spec, &p).unwrap().y;
        let yb = output_and_derivatives(&bw, &spec, &p).unwrap().y;
        for i in 0..4 {
            let fd = (yf[i] - 2.0 * y0[i] + yb[i]) / (dt * dt);
            assert_relative_eq!(fd, v[i], epsilon = 1e-4, max_relative = 1e-4);
        }
    }

    #[test]
    fn on_manifold_closed_loop_stays_on_manifold() {
        let p = params();
        let spec = test_spec(&p);
        let s = SsState::from_flat(&spec.x_s0_vector());
        let (u, out) = fbl_control(&s, &spec, &p).unwrap();
        assert!(out.y.norm() < 1e-9);
        // y_ddot = v = 0 when y = dy = 0
        let dt = 1e-5;
        let fw = step_ss(&s, &u, dt, &p).unwrap();
        let yf = output_and_derivatives(&fw, &spec, &p).unwrap().y;
        assert!(yf.norm() < 1e-8, "output drifted to {}", yf.norm());
    }

    #[test]
    fn command_is_linear_in_gains() {
        let p = params();
        let spec = test_spec(&p);
        let mut s = SsState::from_flat(&spec.x_s0_vector());
        s.q[1] += 0.02;
        let out = output_and_derivatives(&s, &spec, &p).unwrap();
        let v1 = fbl_target_accel(&out, &spec);
        let mut spec2 = spec.clone();
        for i in 0..4 {
            spec2.kp[i] *= 2.0;
        }
        // with dy = 0 here, doubling K_P doubles v exactly
        let mut s_frozen = s;
        s_frozen.dq = Vec5::zeros();
        let out_frozen = output_and_derivatives(&s_frozen, &spec, &p).unwrap();
        let v_a = fbl_target_accel(&out_frozen, &spec);
        let v_b = fbl_target_accel(&out_frozen, &spec2);
        for i in 0..4 {
            assert_relative_eq!(v_b[i], 2.0 * v_a[i], epsilon = 1e-12);
        }
        let _ = v1;
    }
}
