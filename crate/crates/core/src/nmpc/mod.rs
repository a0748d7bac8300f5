//! Predictive control of the fixed-duration double-support phase: per-sample
//! linearization of the constrained dynamics, a condensed convex QP over the
//! remaining input sequence, and a shrinking horizon that steers the state to
//! the gait fixed point under input, state and friction-cone constraints.

pub mod qp;

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector4};

use crate::error::{Error, Result};
use crate::hybrid::integrate::{ds_accel, static_holding_torques};
use crate::params::RobotParams;
use crate::state::{ExtState, Vec5};

pub use qp::{solve_qp, QpSolution, QpStatus};

pub type Vec14 = SVector<f64, 14>;
type Mat14 = SMatrix<f64, 14, 14>;
type Mat14x5 = SMatrix<f64, 14, 5>;

pub fn pack_state(s: &ExtState) -> Vec14 {
    let mut v = Vec14::zeros();
    v.fixed_rows_mut::<7>(0).copy_from(&s.q);
    v.fixed_rows_mut::<7>(7).copy_from(&s.dq);
    v
}

pub fn unpack_state(v: &Vec14) -> ExtState {
    ExtState::new(
        v.fixed_rows::<7>(0).into_owned(),
        v.fixed_rows::<7>(7).into_owned(),
    )
}

/// Reference sequence for the double-support states.
#[derive(Debug, Clone)]
pub struct DsReference {
    /// `samples[k]`, `k = 0..n-1`, from the post-impact state to the target.
    pub samples: Vec<Vec14>,
}

/// Componentwise linear trajectory from the post-impact (swapped) state to
/// the lifted fixed point; endpoints are exact.
pub fn build_reference(x_plus: &Vec14, x_target: &Vec14, n: usize) -> DsReference {
    assert!(n >= 2, "reference needs at least the two endpoints");
    let samples = (0..n)
        .map(|k| {
            let alpha = k as f64 / (n - 1) as f64;
            x_plus + alpha * (x_target - x_plus)
        })
        .collect();
    DsReference { samples }
}

/// One-interval affine model `x+ ~= A x + B eta + c` of the forward-Euler
/// discretized double-support dynamics, exact at the linearization point.
#[derive(Debug, Clone)]
pub struct AffineModel {
    pub a: Mat14,
    pub b: Mat14x5,
    pub c: Vec14,
    /// Linearization point.
    pub x0: Vec14,
    pub eta0: Vec5,
}

fn euler_map(x: &Vec14, eta: &Vec5, dt: f64, p: &RobotParams) -> Result<Vec14> {
    let s = unpack_state(x);
    let (ddq, _) = ds_accel(&s, eta, p)?;
    let mut f = Vec14::zeros();
    f.fixed_rows_mut::<7>(0).copy_from(&s.dq);
    f.fixed_rows_mut::<7>(7).copy_from(&ddq);
    Ok(x + dt * f)
}

/// Linearize the discretized dynamics about `(x, eta0)`: `A` by central
/// finite differences over the state, `B` exactly (the dynamics are affine
/// in the input), `c` as the residual making the model exact at the point.
pub fn discretize_linearize(
    x: &ExtState,
    eta0: &Vec5,
    dt: f64,
    p: &RobotParams,
) -> Result<AffineModel> {
    if !(dt > 0.0) {
        return Err(Error::Precondition("linearization needs dt > 0".into()));
    }
    let x0 = pack_state(x);
    let phi0 = euler_map(&x0, eta0, dt, p)?;
    let mut a = Mat14::zeros();
    let eps = 1e-6;
    for j in 0..14 {
        let mut xp = x0;
        let mut xm = x0;
        xp[j] += eps;
        xm[j] -= eps;
        let fp = euler_map(&xp, eta0, dt, p)?;
        let fm = euler_map(&xm, eta0, dt, p)?;
        a.set_column(j, &((fp - fm) / (2.0 * eps)));
    }
    let mut b = Mat14x5::zeros();
    for j in 0..5 {
        let mut ep = *eta0;
        ep[j] += 1.0;
        let fp = euler_map(&x0, &ep, dt, p)?;
        b.set_column(j, &(fp - phi0));
    }
    let c = phi0 - a * x0 - b * eta0;
    Ok(AffineModel {
        a,
        b,
        c,
        x0,
        eta0: *eta0,
    })
}

/// Contact forces at `(x, eta)` plus their exact input sensitivity and
/// finite-difference state sensitivity, for the linearized friction rows.
#[derive(Debug, Clone)]
pub struct LambdaModel {
    pub lambda0: Vector4<f64>,
    /// d(lambda)/d(eta), 4 x 5 (exact; lambda is affine in the input).
    pub d_eta: SMatrix<f64, 4, 5>,
    /// d(lambda)/dx, 4 x 14 (central differences).
    pub d_x: SMatrix<f64, 4, 14>,
    pub x0: Vec14,
    pub eta0: Vec5,
}

pub fn predict_lambda(x: &ExtState, eta: &Vec5, p: &RobotParams) -> Result<LambdaModel> {
    let (_, lambda0) = ds_accel(x, eta, p)?;
    let mut d_eta = SMatrix::<f64, 4, 5>::zeros();
    for j in 0..5 {
        let mut ep = *eta;
        ep[j] += 1.0;
        let (_, lp) = ds_accel(x, &ep, p)?;
        d_eta.set_column(j, &(lp - lambda0));
    }
    let x0 = pack_state(x);
    let mut d_x = SMatrix::<f64, 4, 14>::zeros();
    let eps = 1e-6;
    for j in 0..14 {
        let mut xp = x0;
        let mut xm = x0;
        xp[j] += eps;
        xm[j] -= eps;
        let (_, lp) = ds_accel(&unpack_state(&xp), eta, p)?;
        let (_, lm) = ds_accel(&unpack_state(&xm), eta, p)?;
        d_x.set_column(j, &((lp - lm) / (2.0 * eps)));
    }
    Ok(LambdaModel {
        lambda0,
        d_eta,
        d_x,
        x0,
        eta0: *eta,
    })
}

/// Controller weights and bounds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NmpcConfig {
    /// Number of control intervals spanning the double-support phase.
    pub horizon: usize,
    /// Control sample time (s).
    pub dt: f64,
    /// State tracking weights (positions / velocities).
    pub w_pos: f64,
    pub w_vel: f64,
    /// Extra weight multiplier on the terminal sample.
    pub terminal_scale: f64,
    /// Input-increment weights (torques / thrust).
    pub w_du: f64,
    pub w_dthrust: f64,
    /// Minimum normal force margin (N).
    pub eps_normal: f64,
    /// Fraction of mu_s used in the linearized cone rows.
    pub friction_margin: f64,
    /// State box half-widths (rad, rad/s; hip coordinates use meters).
    pub q_bound: f64,
    pub dq_bound: f64,
    /// Disable the thruster channel (ablation).
    pub no_thrust: bool,
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            dt: 1e-3,
            w_pos: 10.0,
            w_vel: 1.0,
            terminal_scale: 50.0,
            w_du: 1e-3,
            w_dthrust: 1e-3,
            eps_normal: 0.5,
            friction_margin: 0.9,
            q_bound: std::f64::consts::PI,
            dq_bound: 20.0,
            no_thrust: false,
        }
    }
}

/// Condensed QP over the stacked input sequence, plus the bookkeeping needed
/// to reconstruct the predicted plan.
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub g_rows: DMatrix<f64>,
    pub h_vals: DVector<f64>,
    /// Affine state maps: x_k = t_mats[k] z + d_vecs[k] for k = 1..=H.
    pub t_mats: Vec<DMatrix<f64>>,
    pub d_vecs: Vec<Vec14>,
    pub horizon: usize,
    /// Nominal inputs the decision variables are absolute values of.
    pub eta_dim: usize,
}

/// Stage data for one interval of the horizon.
pub struct StageData {
    pub model: AffineModel,
    pub lambda: LambdaModel,
}

/// Assemble the condensed QP: decision variables are the stacked inputs over
/// the remaining horizon; predicted states are eliminated by rollout of the
/// per-interval affine models; cost sums weighted squared state deviations
/// from the reference and squared input increments; constraints are input
/// boxes, state boxes and the linearized friction cone with a normal-force
/// floor.
#[allow(clippy::too_many_arguments)]
pub fn assemble_qp(
    x_now: &Vec14,
    stages: &[StageData],
    reference: &[Vec14],
    eta_prev: &Vec5,
    cfg: &NmpcConfig,
    p: &RobotParams,
) -> Result<QpProblem> {
    let hh = stages.len();
    if hh == 0 || reference.len() != hh {
        return Err(Error::Precondition(format!(
            "horizon mismatch: {} stages, {} reference samples",
            hh,
            reference.len()
        )));
    }
    let nu = 5;
    let nz = nu * hh;

    // rollout maps: x_k = t_k z + d_k (k = 1..=hh, index k-1 in vectors)
    let mut t_mats: Vec<DMatrix<f64>> = Vec::with_capacity(hh);
    let mut d_vecs: Vec<Vec14> = Vec::with_capacity(hh);
    for k in 0..hh {
        let m = &stages[k].model;
        let mut t = DMatrix::zeros(14, nz);
        let d_prev: Vec14 = if k == 0 { *x_now } else { d_vecs[k - 1] };
        if k > 0 {
            let a_dyn = DMatrix::from_fn(14, 14, |i, j| m.a[(i, j)]);
            let t_prev = &t_mats[k - 1];
            t = a_dyn * t_prev;
        }
        for (i, row) in t.row_iter_mut().enumerate() {
            let _ = row;
            let _ = i;
        }
        // add B on the k-th input block
        for i in 0..14 {
            for j in 0..nu {
                t[(i, k * nu + j)] += m.b[(i, j)];
            }
        }
        let d = m.a * d_prev + m.c;
        t_mats.push(t);
        d_vecs.push(d);
    }

    // weights
    let mut w_stage = Vec14::zeros();
    for i in 0..7 {
        w_stage[i] = cfg.w_pos;
        w_stage[7 + i] = cfg.w_vel;
    }

    let mut hessian = DMatrix::<f64>::zeros(nz, nz);
    let mut gradient = DVector::<f64>::zeros(nz);
    for k in 0..hh {
        let scale = if k + 1 == hh { cfg.terminal_scale } else { 1.0 };
        let t = &t_mats[k];
        let err0 = d_vecs[k] - reference[k];
        for i in 0..14 {
            let wi = w_stage[i] * scale;
            if wi == 0.0 {
                continue;
            }
            let row = t.row(i);
            // hessian += w * row^T row; gradient += w * err0 * row^T
            for a_ in 0..nz {
                let ra = row[a_];
                if ra == 0.0 {
                    continue;
                }
                gradient[a_] += wi * err0[i] * ra;
                for b_ in a_..nz {
                    hessian[(a_, b_)] += wi * ra * row[b_];
                }
            }
        }
    }
    // input-increment penalty
    let w_du = [cfg.w_du, cfg.w_du, cfg.w_du, cfg.w_du, cfg.w_dthrust];
    for k in 0..hh {
        for j in 0..nu {
            let w = w_du[j];
            let idx = k * nu + j;
            hessian[(idx, idx)] += w;
            if k == 0 {
                gradient[idx] -= w * eta_prev[j];
            } else {
                let prev = (k - 1) * nu + j;
                hessian[(prev, prev)] += w;
                hessian[(prev.min(idx), prev.max(idx))] -= w;
            }
        }
    }
    // symmetrize (we filled the upper triangle)
    for a_ in 0..nz {
        for b_ in 0..a_ {
            hessian[(a_, b_)] = hessian[(b_, a_)];
        }
    }
    // factor-of-two convention: cost = z^T H z / 2 + g^T z reproduces the
    // weighted squares up to a constant with H, g scaled by 2
    hessian *= 2.0;
    gradient *= 2.0;

    // constraint rows
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let push_box = |rows: &mut Vec<(Vec<f64>, f64)>, idx: usize, hi: f64, lo: f64, nz: usize| {
        let mut r = vec![0.0; nz];
        r[idx] = 1.0;
        rows.push((r.clone(), hi));
        r[idx] = -1.0;
        rows.push((r, -lo));
    };
    for k in 0..hh {
        for j in 0..4 {
            push_box(&mut rows, k * nu + j, p.u_max, -p.u_max, nz);
        }
        if !cfg.no_thrust {
            push_box(&mut rows, k * nu + 4, p.f_th_max, 0.0, nz);
        } else {
            push_box(&mut rows, k * nu + 4, 0.0, 0.0, nz);
        }
    }
    // state boxes
    for k in 0..hh {
        let t = &t_mats[k];
        let d = &d_vecs[k];
        for i in 0..14 {
            let bound = if i < 7 { cfg.q_bound } else { cfg.dq_bound };
            let row: Vec<f64> = (0..nz).map(|j| t[(i, j)]).collect();
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            rows.push((row, bound - d[i]));
            rows.push((neg, bound + d[i]));
        }
    }
    // friction cone and normal-force floor, linearized at each stage
    let mu = p.mu_s * cfg.friction_margin;
    for k in 0..hh {
        let lam = &stages[k].lambda;
        // lambda ~= lambda0 + d_eta (eta_k - eta0) + d_x (x_k^staged - x0)
        // where the stage state is x_now for k = 0 and the rollout map else.
        let mut lam_rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(4);
        for i in 0..4 {
            let mut coeff = vec![0.0; nz];
            let mut constant = lam.lambda0[i];
            for j in 0..nu {
                coeff[k * nu + j] += lam.d_eta[(i, j)];
                constant -= lam.d_eta[(i, j)] * lam.eta0[j];
            }
            if k > 0 {
                let t = &t_mats[k - 1];
                let d = &d_vecs[k - 1];
                for z in 0..nz {
                    let mut acc = 0.0;
                    for s_ in 0..14 {
                        acc += lam.d_x[(i, s_)] * t[(s_, z)];
                    }
                    coeff[z] += acc;
                }
                for s_ in 0..14 {
                    constant += lam.d_x[(i, s_)] * (d[s_] - lam.x0[s_]);
                }
            } else {
                for s_ in 0..14 {
                    constant += lam.d_x[(i, s_)] * (x_now[s_] - lam.x0[s_]);
                }
            }
            lam_rows.push((coeff, constant));
        }
        for foot in 0..2 {
            let (t_row, t_const) = &lam_rows[2 * foot];
            let (n_row, n_const) = &lam_rows[2 * foot + 1];
            // +lambda_T - mu lambda_N <= 0
            let r1: Vec<f64> = t_row
                .iter()
                .zip(n_row)
                .map(|(t, n)| t - mu * n)
                .collect();
            rows.push((r1, -(t_const - mu * n_const)));
            // -lambda_T - mu lambda_N <= 0
            let r2: Vec<f64> = t_row
                .iter()
                .zip(n_row)
                .map(|(t, n)| -t - mu * n)
                .collect();
            rows.push((r2, t_const + mu * n_const));
            // lambda_N >= eps
            let r3: Vec<f64> = n_row.iter().map(|n| -n).collect();
            rows.push((r3, n_const - cfg.eps_normal));
        }
    }

    let m_rows = rows.len();
    let mut g_rows = DMatrix::zeros(m_rows, nz);
    let mut h_vals = DVector::zeros(m_rows);
    for (ri, (coeffs, rhs)) in rows.into_iter().enumerate() {
        for (ci, v) in coeffs.into_iter().enumerate() {
            g_rows[(ri, ci)] = v;
        }
        h_vals[ri] = rhs;
    }

    Ok(QpProblem {
        hessian,
        gradient,
        g_rows,
        h_vals,
        t_mats,
        d_vecs,
        horizon: hh,
        eta_dim: nu,
    })
}

/// Solved input sequence with predictions and solver diagnostics.
#[derive(Debug, Clone)]
pub struct DsPlan {
    pub eta: Vec<Vec5>,
    pub predicted_states: Vec<Vec14>,
    pub predicted_lambda: Vec<Vector4<f64>>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub active_set_size: usize,
    pub cost: f64,
}

/// Solve a condensed problem into a plan.
pub fn solve_plan(qp: &QpProblem, stages: &[StageData]) -> Result<DsPlan> {
    let sol = solve_qp(&qp.hessian, &qp.gradient, &qp.g_rows, &qp.h_vals)?;
    let nz = sol.x.len();
    let nu = qp.eta_dim;
    let mut eta = Vec::with_capacity(qp.horizon);
    for k in 0..qp.horizon {
        let mut e = Vec5::zeros();
        for j in 0..nu {
            e[j] = sol.x[k * nu + j];
        }
        eta.push(e);
    }
    let mut predicted_states = Vec::with_capacity(qp.horizon);
    for k in 0..qp.horizon {
        let t = &qp.t_mats[k];
        let mut x = qp.d_vecs[k];
        for i in 0..14 {
            for j in 0..nz {
                x[i] += t[(i, j)] * sol.x[j];
            }
        }
        predicted_states.push(x);
    }
    let mut predicted_lambda = Vec::with_capacity(qp.horizon);
    for (k, stage) in stages.iter().enumerate() {
        let lam = &stage.lambda;
        let mut l = lam.lambda0;
        l += lam.d_eta * (eta[k] - lam.eta0);
        if k > 0 {
            l += lam.d_x * (predicted_states[k - 1] - lam.x0);
        }
        predicted_lambda.push(l);
    }
    let cost = 0.5 * (sol.x.transpose() * &qp.hessian * &sol.x)[(0, 0)]
        + qp.gradient.dot(&sol.x);
    Ok(DsPlan {
        eta,
        predicted_states,
        predicted_lambda,
        status: sol.status,
        kkt_residual: sol.kkt_residual,
        active_set_size: sol.active_set_size,
        cost,
    })
}

/// Shrinking-horizon double-support controller.
pub struct DsController {
    pub cfg: NmpcConfig,
    pub reference: DsReference,
    pub eta_prev: Vec5,
    /// Interval index within the phase (0-based).
    pub k: usize,
}

/// Per-step diagnostics handed to the log.
#[derive(Debug, Clone)]
pub struct DsStepInfo {
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub active_set_size: usize,
    pub cost: f64,
    pub fallback: bool,
}

impl DsController {
    /// Set up the controller at double-support entry. The reference runs
    /// from the entry state to the lifted fixed point; the previous input
    /// starts at the static holding torques of the entry pose.
    pub fn new(
        x_entry: &ExtState,
        x_target: &Vec14,
        cfg: NmpcConfig,
        p: &RobotParams,
    ) -> Result<Self> {
        let x0 = pack_state(x_entry);
        let reference = build_reference(&x0, x_target, cfg.horizon + 1);
        let (u_hold, _) = static_holding_torques(x_entry, p, 0.0)?;
        let mut eta_prev = Vec5::zeros();
        for j in 0..4 {
            eta_prev[j] = u_hold[j].clamp(-p.u_max, p.u_max);
        }
        Ok(Self {
            cfg,
            reference,
            eta_prev,
            k: 0,
        })
    }

    /// Re-linearize at the measured state, re-assemble and re-solve the
    /// shrinking-horizon QP, and return the first input (clamped to bounds
    /// as a safety net). Falls back to the previous input when the QP
    /// reports failure.
    pub fn step(&mut self, x_now: &ExtState, p: &RobotParams) -> Result<(Vec5, DsStepInfo)> {
        let hh = self.cfg.horizon - self.k;
        if hh == 0 {
            return Err(Error::Precondition("double-support horizon exhausted".into()));
        }
        let x_now_v = pack_state(x_now);
        // nominal rollout under held input
        let mut stages = Vec::with_capacity(hh);
        let mut x_bar = x_now_v;
        let mut roll_ok = true;
        for _ in 0..hh {
            let xs = unpack_state(&x_bar);
            let model = match discretize_linearize(&xs, &self.eta_prev, self.cfg.dt, p) {
                Ok(m) => m,
                Err(_) => {
                    roll_ok = false;
                    break;
                }
            };
            let lambda = match predict_lambda(&xs, &self.eta_prev, p) {
                Ok(l) => l,
                Err(_) => {
                    roll_ok = false;
                    break;
                }
            };
            x_bar = model.a * x_bar + model.b * self.eta_prev + model.c;
            stages.push(StageData { model, lambda });
        }
        let reference: Vec<Vec14> = (self.k + 1..=self.cfg.horizon)
            .map(|i| self.reference.samples[i])
            .collect();
        let plan = if roll_ok {
            assemble_qp(&x_now_v, &stages, &reference, &self.eta_prev, &self.cfg, p)
                .and_then(|qp| solve_plan(&qp, &stages))
        } else {
            Err(Error::DaeSingularity)
        };
        let (eta, info) = match plan {
            Ok(plan) if plan.status == QpStatus::Optimal => {
                let eta = clamp_eta(&plan.eta[0], p, self.cfg.no_thrust);
                (
                    eta,
                    DsStepInfo {
                        status: plan.status,
                        kkt_residual: plan.kkt_residual,
                        active_set_size: plan.active_set_size,
                        cost: plan.cost,
                        fallback: false,
                    },
                )
            }
            Ok(plan) => {
                // solver struggled: hold the previous (clamped) input
                let eta = clamp_eta(&self.eta_prev, p, self.cfg.no_thrust);
                (
                    eta,
                    DsStepInfo {
                        status: plan.status,
                        kkt_residual: plan.kkt_residual,
                        active_set_size: plan.active_set_size,
                        cost: plan.cost,
                        fallback: true,
                    },
                )
            }
            Err(_) => {
                let eta = clamp_eta(&self.eta_prev, p, self.cfg.no_thrust);
                (
                    eta,
                    DsStepInfo {
                        status: QpStatus::Infeasible,
                        kkt_residual: f64::INFINITY,
                        active_set_size: 0,
                        cost: f64::NAN,
                        fallback: true,
                    },
                )
            }
        };
        self.eta_prev = eta;
        self.k += 1;
        Ok((eta, info))
    }
}

pub fn clamp_eta(eta: &Vec5, p: &RobotParams, no_thrust: bool) -> Vec5 {
    let mut out = *eta;
    for j in 0..4 {
        out[j] = out[j].clamp(-p.u_max, p.u_max);
    }
    out[4] = if no_thrust {
        0.0
    } else {
        out[4].clamp(0.0, p.f_th_max)
    };
    out
}

/// Lift a single-support fixed point into double-support coordinates with
/// the stance foot at `stance_x`: the hip position follows from the pinned
/// forward kinematics, the hip velocity from its Jacobian.
pub fn lift_fixed_point(x_s0: &SVector<f64, 10>, stance_x: f64, p: &RobotParams) -> Vec14 {
    let ss = crate::state::SsState::from_flat(x_s0);
    let hip = crate::model::chain::ss_hip(&ss.q, &ss.dq, p);
    let mut out = Vec14::zeros();
    for i in 0..5 {
        out[i] = ss.q[i];
        out[7 + i] = ss.dq[i];
    }
    out[5] = hip.pos.x + stance_x;
    out[6] = hip.pos.y;
    let hip_vel = hip.velocity(&ss.dq);
    out[12] = hip_vel.x;
    out[13] = hip_vel.y;
    out
}
