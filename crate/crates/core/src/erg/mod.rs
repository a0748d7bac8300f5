//! Explicit reference governor on the equivalent variable-length inverted
//! pendulum (VLIP): the applied COM-length reference `w` chases the nominal
//! reference `r` only as fast as the tracking Lyapunov level stays inside
//! the constraint-admissible invariant set, with no online optimization.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model;
use crate::params::RobotParams;
use crate::state::{SsState, Vec4, ACTUATED};

/// Equivalent pendulum model and its tracking law parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlipModel {
    /// Equivalent pendulum mass (kg).
    pub m_v: f64,
    /// Length tracking stiffness (N/m).
    pub kp_v: f64,
    /// Length tracking damping (N s/m).
    pub kd_v: f64,
    /// Bounds on the equivalent control `u_v` (N).
    pub u_v_bounds: [f64; 2],
    /// Bounds on the pendulum length (m).
    pub l_bounds: [f64; 2],
}

impl VlipModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_v > 0.0 && self.kp_v > 0.0 && self.kd_v >= 0.0) {
            return Err(Error::Config("VLIP gains/mass must be positive".into()));
        }
        if self.u_v_bounds[0] >= self.u_v_bounds[1] || self.l_bounds[0] >= self.l_bounds[1] {
            return Err(Error::Config("VLIP bounds must be ordered".into()));
        }
        Ok(())
    }

    /// Lyapunov metric `P = diag(K_p, m_v)`.
    pub fn p_diag(&self) -> [f64; 2] {
        [self.kp_v, self.m_v]
    }
}

/// One affine constraint row `c_x . x_v + c_w w + c_limit >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub c_x: [f64; 2],
    pub c_w: f64,
    pub c_limit: f64,
}

impl ConstraintRow {
    pub fn eval(&self, x_v: &Vector2<f64>, w: f64) -> f64 {
        self.c_x[0] * x_v.x + self.c_x[1] * x_v.y + self.c_w * w + self.c_limit
    }
}

/// Affine state/input constraints handed to the governor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub rows: Vec<ConstraintRow>,
}

impl ConstraintSet {
    /// Default set: both `u_v` bounds (through the unsaturated tracking law
    /// with upright gravity compensation) and both length bounds.
    pub fn for_model(model: &VlipModel, g: f64) -> Self {
        let grav = model.m_v * g;
        ConstraintSet {
            rows: vec![
                // u_v <= u_max
                ConstraintRow {
                    c_x: [model.kp_v, model.kd_v],
                    c_w: -model.kp_v,
                    c_limit: model.u_v_bounds[1] - grav,
                },
                // u_v >= u_min
                ConstraintRow {
                    c_x: [-model.kp_v, -model.kd_v],
                    c_w: model.kp_v,
                    c_limit: grav - model.u_v_bounds[0],
                },
                // l <= l_max
                ConstraintRow {
                    c_x: [-1.0, 0.0],
                    c_w: 0.0,
                    c_limit: model.l_bounds[1],
                },
                // l >= l_min
                ConstraintRow {
                    c_x: [1.0, 0.0],
                    c_w: 0.0,
                    c_limit: -model.l_bounds[0],
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Config("constraint set needs at least one row".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.c_x[0] == 0.0 && row.c_x[1] == 0.0 && row.c_w == 0.0 {
                return Err(Error::Config(format!("constraint row {i} is degenerate")));
            }
        }
        Ok(())
    }
}

/// Governor memory: applied reference, nominal reference and the gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernorState {
    /// Applied (governed) reference (m).
    pub w: f64,
    /// Nominal reference (m).
    pub r: f64,
    /// Attraction gain (1/s); large values track `r` tightly.
    pub kappa: f64,
    /// Last threshold value, for logging.
    pub last_gamma: f64,
    /// Last Lyapunov value, for logging.
    pub last_v: f64,
}

impl GovernorState {
    /// Start the governor at a strictly feasible applied reference.
    pub fn new(w0: f64, kappa: f64, constraints: &ConstraintSet, model: &VlipModel) -> Result<Self> {
        let g0 = gamma(w0, constraints, model)?;
        Ok(Self {
            w: w0,
            r: w0,
            kappa,
            last_gamma: g0,
            last_v: 0.0,
        })
    }
}

/// VLIP state `x_v = [l, l_dot]` of the pinned single-support model: COM
/// distance from the stance foot and its rate.
pub fn vlip_state(state: &SsState, p: &RobotParams) -> Vector2<f64> {
    let com = model::com_ss(state, p);
    let l = com.pos.norm();
    let vel = com.jac * state.dq;
    let ldot = com.pos.dot(&vel) / l;
    Vector2::new(l, ldot)
}

/// Tracking Lyapunov function `V = (x_v - x_w)^T P (x_v - x_w)` with the
/// steady state `x_w = [w, 0]`.
pub fn lyapunov(x_v: &Vector2<f64>, w: f64, model: &VlipModel) -> f64 {
    let dl = x_v.x - w;
    model.kp_v * dl * dl + model.m_v * x_v.y * x_v.y
}

/// Threshold `Gamma(w)`: squared P-metric distance from the steady state of
/// `w` to the nearest constraint boundary. Errors if any constraint is
/// violated at the steady state itself.
pub fn gamma(w: f64, constraints: &ConstraintSet, model: &VlipModel) -> Result<f64> {
    let x_w = Vector2::new(w, 0.0);
    let p_inv = [1.0 / model.kp_v, 1.0 / model.m_v];
    let mut best = f64::INFINITY;
    for (i, row) in constraints.rows.iter().enumerate() {
        let value = row.eval(&x_w, w);
        if value < 0.0 {
            return Err(Error::InfeasibleReference { index: i, value });
        }
        let denom = row.c_x[0] * row.c_x[0] * p_inv[0] + row.c_x[1] * row.c_x[1] * p_inv[1];
        if denom > 0.0 {
            best = best.min(value * value / denom);
        }
    }
    Ok(best)
}

/// One Euler step of the governed reference dynamics
/// `w_dot = kappa * max(Gamma - V, 0) * sat_1(r - w)`, with a feasibility
/// backtrack so `w` never leaves the strictly admissible set.
pub fn governor_step(
    gov: &mut GovernorState,
    x_v: &Vector2<f64>,
    constraints: &ConstraintSet,
    model: &VlipModel,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Precondition("governor step needs dt > 0".into()));
    }
    let g_now = gamma(gov.w, constraints, model)?;
    let v_now = lyapunov(x_v, gov.w, model);
    gov.last_gamma = g_now;
    gov.last_v = v_now;
    let gap = (g_now - v_now).max(0.0);
    let attract = (gov.r - gov.w).clamp(-1.0, 1.0);
    let mut delta = gov.kappa * gap * attract * dt;
    // never overshoot the nominal reference
    if delta.abs() > (gov.r - gov.w).abs() {
        delta = gov.r - gov.w;
    }
    // keep the applied reference strictly feasible
    for _ in 0..60 {
        if delta == 0.0 {
            break;
        }
        match gamma(gov.w + delta, constraints, model) {
            Ok(g) if g > 0.0 => break,
            _ => delta *= 0.5,
        }
    }
    gov.w += delta;
    Ok(gov.w)
}

/// Equivalent control: PD tracking of the applied reference plus gravity
/// compensation along the pendulum axis, saturated to the model bounds.
/// Returns the applied value and whether saturation clipped the command.
pub fn vlip_control(
    x_v: &Vector2<f64>,
    w: f64,
    model: &VlipModel,
    g: f64,
    cos_incl: f64,
) -> (f64, bool) {
    let raw = model.kp_v * (w - x_v.x) - model.kd_v * x_v.y + model.m_v * g * cos_incl;
    let clamped = raw.clamp(model.u_v_bounds[0], model.u_v_bounds[1]);
    (clamped, clamped != raw)
}

/// Unsaturated command, for constraint-violation accounting.
pub fn vlip_control_raw(x_v: &Vector2<f64>, w: f64, model: &VlipModel, g: f64, cos_incl: f64) -> f64 {
    model.kp_v * (w - x_v.x) - model.kd_v * x_v.y + model.m_v * g * cos_incl
}

/// Map the equivalent control to joint torques by virtual work:
/// `u = -u_v (dl/dq_b)^T` with the torso contribution excluded.
pub fn map_to_joint_torques(u_v: f64, state: &SsState, p: &RobotParams) -> Result<Vec4> {
    let com = model::com_ss(state, p);
    let l = com.pos.norm();
    if l < 1e-9 {
        return Err(Error::Singular {
            context: "COM at the stance foot; length gradient undefined".into(),
        });
    }
    let mut u = Vec4::zeros();
    for (row, &idx) in ACTUATED.iter().enumerate() {
        let dl_dq = (com.pos.x * com.jac[(0, idx)] + com.pos.y * com.jac[(1, idx)]) / l;
        u[row] = -u_v * dl_dq;
    }
    Ok(u)
}

/// Closed-loop trace of the standalone VLIP benchmark.
#[derive(Debug, Clone)]
pub struct VlipBenchResult {
    /// Samples of (t, l, w, commanded u_v, applied u_v).
    pub trace: Vec<(f64, f64, f64, f64, f64)>,
    /// Samples where the *commanded* control violated the bounds.
    pub violations: usize,
    /// |w - r| at the end of the run.
    pub w_error: f64,
    /// |l - r| at the end of the run.
    pub l_error: f64,
}

/// Simulate the vertical VLIP plant `m_v l_ddot = u_v - m_v g` tracking a
/// step reference, governed or not. The governed variant must keep the
/// commanded control within bounds; the raw variant generally does not.
pub fn vlip_benchmark(
    model: &VlipModel,
    constraints: &ConstraintSet,
    kappa: f64,
    l0: f64,
    r_target: f64,
    g: f64,
    duration: f64,
    dt: f64,
    governed: bool,
) -> Result<VlipBenchResult> {
    model.validate()?;
    constraints.validate()?;
    let mut x = Vector2::new(l0, 0.0);
    let mut gov = GovernorState::new(l0, kappa, constraints, model)?;
    gov.r = r_target;
    let mut trace = Vec::new();
    let mut violations = 0;
    let steps = (duration / dt).round() as usize;
    for k in 0..steps {
        let w = if governed {
            governor_step(&mut gov, &x, constraints, model, dt)?
        } else {
            r_target
        };
        let raw = vlip_control_raw(&x, w, model, g, 1.0);
        let (applied, _) = vlip_control(&x, w, model, g, 1.0);
        if raw < model.u_v_bounds[0] - 1e-12 || raw > model.u_v_bounds[1] + 1e-12 {
            violations += 1;
        }
        // semi-implicit Euler on the pendulum length dynamics
        let acc = (applied - model.m_v * g) / model.m_v;
        x.y += dt * acc;
        x.x += dt * x.y;
        trace.push((k as f64 * dt, x.x, w, raw, applied));
    }
    Ok(VlipBenchResult {
        trace,
        violations,
        w_error: (gov.w - r_target).abs(),
        l_error: (x.x - r_target).abs(),
    })
}
