//! The full walking cycle: feedback-linearized single support filtered by
//! the reference governor, touchdown, two-point impact, leg relabeling, and
//! the predictive double-support phase that restores the fixed point.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::erg::{self, ConstraintSet, GovernorState, VlipModel};
use crate::error::{Error, Result};
use crate::gait::{fbl_control, GaitSpec};
use crate::model::{self, chain};
use crate::nmpc::{lift_fixed_point, DsController, NmpcConfig};
use crate::params::RobotParams;
use crate::state::{ExtState, SsState, Vec4};

use super::event::{detect_touchdown, swing_height, TrajSample};
use super::impact::{impact_map, swap_legs, ImpactResult};
use super::integrate::{ss_accel, step_ds, step_ss};
use super::log::{GaitLog, LogRow, Phase, RunOutcome, StepRecord};

/// Reference-governor configuration of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErgConfig {
    pub enabled: bool,
    pub kappa: f64,
    pub model: VlipModel,
}

/// Everything a walking run needs besides the gait specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: RobotParams,
    /// Single-support integrator substep (s).
    pub ss_dt: f64,
    /// Control sample time for both the governor and the SS torque update.
    pub control_dt: f64,
    /// Double-support inner integration substep (s).
    pub ds_inner_dt: f64,
    /// Fixed double-support duration (s).
    pub ds_duration: f64,
    pub nmpc: NmpcConfig,
    pub erg: ErgConfig,
    /// Abort if a step finds no touchdown within this time (s).
    pub max_ss_time: f64,
    /// Fall thresholds.
    pub fall_hip_height: f64,
    pub fall_torso_angle: f64,
    /// Touchdown bisection tolerance on the swing-foot height (m).
    pub touchdown_tol: f64,
    /// Ignore touchdown events during this initial window of each step (s).
    pub arm_time: f64,
    /// Accept touchdown only past this normalized phase; shallow ground
    /// crossings earlier in the step are release transients, deep ones are
    /// scuffs that end the run.
    pub min_touchdown_phase: f64,
    /// Swing-foot depth that counts as a scuff before the landing zone (m).
    pub scuff_depth: f64,
    /// Reproducibility tag carried into the log.
    pub seed: u64,
}

impl SimConfig {
    /// Defaults matched to the robot parameters.
    pub fn new(params: RobotParams) -> Self {
        let m_v = params.total_mass();
        Self {
            params,
            ss_dt: 1e-4,
            control_dt: 1e-3,
            ds_inner_dt: 1e-4,
            ds_duration: 0.010,
            nmpc: NmpcConfig::default(),
            erg: ErgConfig {
                enabled: true,
                kappa: 100.0,
                model: VlipModel {
                    m_v,
                    kp_v: 100.0,
                    kd_v: 20.0,
                    u_v_bounds: [-10.0, 30.0],
                    l_bounds: [0.25, 0.52],
                },
            },
            max_ss_time: 2.0,
            fall_hip_height: 0.15,
            fall_torso_angle: std::f64::consts::FRAC_PI_2,
            touchdown_tol: 1e-8,
            arm_time: 0.02,
            min_touchdown_phase: 0.5,
            scuff_depth: 3e-3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.erg.model.validate()?;
        if !(self.ss_dt > 0.0 && self.control_dt >= self.ss_dt) {
            return Err(Error::Config("need 0 < ss_dt <= control_dt".into()));
        }
        if !(self.ds_inner_dt > 0.0 && self.nmpc.dt >= self.ds_inner_dt) {
            return Err(Error::Config("need 0 < ds_inner_dt <= nmpc.dt".into()));
        }
        let horizon_time = self.nmpc.dt * self.nmpc.horizon as f64;
        if (horizon_time - self.ds_duration).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "NMPC horizon ({} x {}) must span the DS duration {}",
                self.nmpc.horizon, self.nmpc.dt, self.ds_duration
            )));
        }
        Ok(())
    }
}

/// Per-sample output of the single-support controller.
pub struct SsControlSample {
    pub u: Vec4,
    /// Normalized phase at the sample.
    pub s: f64,
    pub w: f64,
    pub r: f64,
    pub v_lyap: f64,
    pub gamma: f64,
    /// Raw equivalent control exceeded its bounds at this sample.
    pub saturated: bool,
    /// Peak output deviation (for diagnostics).
    pub output_norm: f64,
}

/// The deployed single-support controller: output tracking by feedback
/// linearization plus the governed COM-length correction mapped through
/// virtual work. One instance persists across steps (the governor has
/// memory).
pub struct SsController {
    constraints: ConstraintSet,
    gov: GovernorState,
    enabled: bool,
    kappa_model: VlipModel,
    control_dt: f64,
}

impl SsController {
    pub fn new(cfg: &SimConfig, spec: &GaitSpec) -> Result<Self> {
        let constraints = ConstraintSet::for_model(&cfg.erg.model, cfg.params.g);
        constraints.validate()?;
        let r0 = spec.nominal_com_length(&cfg.params, 0.0);
        let gov = GovernorState::new(r0, cfg.erg.kappa, &constraints, &cfg.erg.model)?;
        Ok(Self {
            constraints,
            gov,
            enabled: cfg.erg.enabled,
            kappa_model: cfg.erg.model.clone(),
            control_dt: cfg.control_dt,
        })
    }

    pub fn compute(
        &mut self,
        state: &SsState,
        spec: &GaitSpec,
        p: &RobotParams,
    ) -> Result<SsControlSample> {
        let (u_fbl, out) = fbl_control(state, spec, p)?;
        let x_v = erg::vlip_state(state, p);
        let r_nom = spec.nominal_com_length(p, out.s);
        self.gov.r = r_nom;
        let w = if self.enabled {
            self.gov.w = self.gov.w.clamp(
                self.kappa_model.l_bounds[0] + 1e-6,
                self.kappa_model.l_bounds[1] - 1e-6,
            );
            erg::governor_step(
                &mut self.gov,
                &x_v,
                &self.constraints,
                &self.kappa_model,
                self.control_dt,
            )?
        } else {
            self.gov.w = r_nom;
            self.gov.last_v = erg::lyapunov(&x_v, r_nom, &self.kappa_model);
            self.gov.last_gamma = 0.0;
            r_nom
        };
        let com = model::com_ss(state, p);
        let cos_incl = (com.pos.y / com.pos.norm()).clamp(-1.0, 1.0);
        let u_v_raw = erg::vlip_control_raw(&x_v, w, &self.kappa_model, p.g, cos_incl);
        let saturated = u_v_raw < self.kappa_model.u_v_bounds[0] - 1e-12
            || u_v_raw > self.kappa_model.u_v_bounds[1] + 1e-12;
        let mut u = u_fbl;
        if self.enabled {
            let corr =
                erg::map_to_joint_torques(self.kappa_model.kp_v * (w - r_nom), state, p)?;
            u += corr;
        }
        for i in 0..4 {
            u[i] = u[i].clamp(-p.u_max, p.u_max);
        }
        Ok(SsControlSample {
            u,
            s: out.s,
            w,
            r: r_nom,
            v_lyap: self.gov.last_v,
            gamma: self.gov.last_gamma,
            saturated,
            output_norm: out.y.amax(),
        })
    }
}

/// How one single-support phase ended.
enum SsEnd {
    Touchdown(super::event::TouchdownEvent),
    Failed(String),
}

struct SsPhaseResult {
    end: SsEnd,
    erg_saturations: usize,
    max_output_norm: f64,
    max_torque: f64,
    min_swing_clearance: f64,
}

/// Drive one single-support phase from `state` until touchdown or failure.
/// `on_sample` sees every control sample (for logging).
fn drive_ss_phase(
    cfg: &SimConfig,
    spec: &GaitSpec,
    ctrl: &mut SsController,
    state: &mut SsState,
    t: &mut f64,
    mut on_sample: impl FnMut(f64, &SsState, &SsControlSample),
) -> Result<SsPhaseResult> {
    let p = &cfg.params;
    let n_sub = (cfg.control_dt / cfg.ss_dt).round() as usize;
    let t_start = *t;
    let mut erg_saturations = 0usize;
    let mut max_output_norm: f64 = 0.0;
    let mut max_torque: f64 = 0.0;
    let mut min_clearance = f64::INFINITY;
    let end = loop {
        if let Some(reason) = fall_reason(state, cfg) {
            break SsEnd::Failed(reason);
        }
        if *t - t_start > cfg.max_ss_time {
            break SsEnd::Failed("no touchdown within the step time limit".into());
        }
        let sample = match ctrl.compute(state, spec, p) {
            Ok(s) => s,
            Err(Error::Controller(msg)) => break SsEnd::Failed(msg),
            Err(e) => return Err(e),
        };
        if sample.saturated {
            erg_saturations += 1;
        }
        if *t - t_start >= cfg.arm_time {
            max_output_norm = max_output_norm.max(sample.output_norm);
        }
        max_torque = max_torque.max(sample.u.amax());
        on_sample(*t, state, &sample);

        let mut samples = Vec::with_capacity(n_sub + 1);
        samples.push(TrajSample {
            t: *t,
            state: *state,
            ddq: ss_accel(state, &sample.u, p)?,
        });
        let mut cur = *state;
        for i in 1..=n_sub {
            cur = step_ss(&cur, &sample.u, cfg.ss_dt, p)?;
            samples.push(TrajSample {
                t: *t + i as f64 * cfg.ss_dt,
                state: cur,
                ddq: ss_accel(&cur, &sample.u, p)?,
            });
        }
        if (0.2..=0.8).contains(&sample.s) {
            let (h, _) = swing_height(&cur, p);
            min_clearance = min_clearance.min(h);
        }
        let armed = *t - t_start >= cfg.arm_time && sample.s >= cfg.min_touchdown_phase;
        if armed {
            if let Some(ev) = detect_touchdown(&samples, p, cfg.touchdown_tol) {
                break SsEnd::Touchdown(ev);
            }
        } else {
            let (h, _) = swing_height(&cur, p);
            if h < -cfg.scuff_depth {
                break SsEnd::Failed("swing foot scuffed before the landing zone".into());
            }
        }
        *state = cur;
        *t += cfg.control_dt;
    };
    Ok(SsPhaseResult {
        end,
        erg_saturations,
        max_output_norm,
        max_torque,
        min_swing_clearance: min_clearance,
    })
}

/// Outcome of one double-support phase.
struct DsPhaseResult {
    exit: ExtState,
    min_lambda_n: f64,
    max_friction_ratio: f64,
    qp_fallbacks: usize,
    mean_thrust: f64,
    foot_drift: f64,
}

/// Drive the fixed-duration double-support phase from the post-impact state.
fn drive_ds_phase(
    cfg: &SimConfig,
    post: &ExtState,
    x_target: &crate::nmpc::Vec14,
    mut on_sample: impl FnMut(usize, &ExtState, &crate::state::Vec5, [f64; 4], &str),
) -> Result<DsPhaseResult> {
    let p = &cfg.params;
    let n_inner = (cfg.nmpc.dt / cfg.ds_inner_dt).round() as usize;
    let mut ctrl = DsController::new(post, x_target, cfg.nmpc.clone(), p)?;
    let mut cur = *post;
    let feet0 = model::foot_kinematics(post, p).p;
    let mut min_lambda_n = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut qp_fallbacks = 0usize;
    let mut thrust_sum = 0.0;
    let mut foot_drift: f64 = 0.0;
    for k in 0..cfg.nmpc.horizon {
        let (eta, info) = ctrl.step(&cur, p)?;
        if info.fallback {
            qp_fallbacks += 1;
        }
        thrust_sum += eta[4];
        let mut lambda_row = [0.0; 4];
        for i in 0..n_inner {
            let res = step_ds(&cur, &eta, cfg.ds_inner_dt, p)?;
            if i == 0 {
                lambda_row = [res.lambda[0], res.lambda[1], res.lambda[2], res.lambda[3]];
            }
            for foot in 0..2 {
                let l_t = res.lambda[2 * foot];
                let l_n = res.lambda[2 * foot + 1];
                min_lambda_n = min_lambda_n.min(l_n);
                if l_n > 1e-9 {
                    max_ratio = max_ratio.max((l_t / l_n).abs());
                }
            }
            cur = res.next_state;
            let feet = model::foot_kinematics(&cur, p).p;
            foot_drift = foot_drift.max((feet - feet0).abs().max());
        }
        let status = format!("{:?}", info.status).to_lowercase();
        let status = if info.fallback {
            format!("{status}+fallback")
        } else {
            status
        };
        on_sample(k, &cur, &eta, lambda_row, &status);
    }
    Ok(DsPhaseResult {
        exit: cur,
        min_lambda_n,
        max_friction_ratio: max_ratio,
        qp_fallbacks,
        mean_thrust: thrust_sum / cfg.nmpc.horizon as f64,
        foot_drift,
    })
}

/// Lift a single-support state to extended coordinates (stance at origin).
pub fn lift_ss(state: &SsState, p: &RobotParams) -> ExtState {
    let hip = chain::ss_hip(&state.q, &state.dq, p);
    ExtState::from_parts(state, hip.pos, hip.velocity(&state.dq))
}

/// Apply the impact map and leg swap to a touchdown state. Returns the
/// post-impact (swapped) extended state, the impulse, and the landing-foot
/// horizontal position in the stance frame.
pub fn impact_and_swap(
    state: &SsState,
    p: &RobotParams,
) -> Result<(ExtState, ImpactResult, f64)> {
    let ext_pre = lift_ss(state, p);
    let swing = chain::ss_swing_foot(&state.q, &state.dq, p);
    let imp = impact_map(&ext_pre, p)?;
    let post = swap_legs(&ExtState::new(ext_pre.q, imp.dq_plus));
    Ok((post, imp, swing.pos.x))
}

/// Stance-foot ground reaction of the pinned single-support model
/// (diagnostic): least-squares fit of the extended dynamics residual onto
/// the stance-foot Jacobian rows.
fn ss_stance_reaction(state: &SsState, u: &Vec4, p: &RobotParams) -> Result<Vector2<f64>> {
    let ddq = ss_accel(state, u, p)?;
    let hip = chain::ss_hip(&state.q, &state.dq, p);
    let hip_acc = hip.jac * ddq + hip.jdq;
    let ext = lift_ss(state, p);
    let m = model::extended_matrices(&ext, p)?;
    let mut ddq_e = nalgebra::DVector::zeros(7);
    for i in 0..5 {
        ddq_e[i] = ddq[i];
    }
    ddq_e[5] = hip_acc.x;
    ddq_e[6] = hip_acc.y;
    let mut u_dyn = nalgebra::DVector::zeros(4);
    for i in 0..4 {
        u_dyn[i] = u[i];
    }
    let resid = &m.d * ddq_e + &m.h - &m.b * u_dyn;
    let fk = model::foot_kinematics(&ext, p);
    let mut jt = nalgebra::DMatrix::zeros(7, 2);
    for i in 0..7 {
        jt[(i, 0)] = fk.jac[(0, i)];
        jt[(i, 1)] = fk.jac[(1, i)];
    }
    let sol = jt
        .svd(true, true)
        .solve(&resid, 1e-12)
        .map_err(|e| Error::Singular { context: e.into() })?;
    Ok(Vector2::new(sol[0], sol[1]))
}

struct Logger {
    rows: Vec<LogRow>,
    world_x: f64,
}

impl Logger {
    fn push_ss(
        &mut self,
        t: f64,
        state: &SsState,
        p: &RobotParams,
        u: &Vec4,
        lambda_st: Vector2<f64>,
        gov: (f64, f64, f64, f64),
    ) {
        let hip = chain::ss_hip(&state.q, &state.dq, p);
        let hip_vel = hip.velocity(&state.dq);
        let mut q = [0.0; 7];
        let mut dq = [0.0; 7];
        for i in 0..5 {
            q[i] = state.q[i];
            dq[i] = state.dq[i];
        }
        q[5] = self.world_x + hip.pos.x;
        q[6] = hip.pos.y;
        dq[5] = hip_vel.x;
        dq[6] = hip_vel.y;
        self.rows.push(LogRow {
            t,
            phase: Phase::Ss,
            q,
            dq,
            u: [u[0], u[1], u[2], u[3]],
            f_th: 0.0,
            lambda: [lambda_st.x, lambda_st.y, 0.0, 0.0],
            w: gov.0,
            r: gov.1,
            v_lyap: gov.2,
            gamma: gov.3,
            qp_status: "-".into(),
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn push_ext(
        &mut self,
        t: f64,
        phase: Phase,
        state: &ExtState,
        u: &Vec4,
        f_th: f64,
        lambda: [f64; 4],
        gov: (f64, f64, f64, f64),
        qp_status: &str,
    ) {
        let mut q = [0.0; 7];
        let mut dq = [0.0; 7];
        for i in 0..7 {
            q[i] = state.q[i];
            dq[i] = state.dq[i];
        }
        q[5] += self.world_x;
        self.rows.push(LogRow {
            t,
            phase,
            q,
            dq,
            u: [u[0], u[1], u[2], u[3]],
            f_th,
            lambda,
            w: gov.0,
            r: gov.1,
            v_lyap: gov.2,
            gamma: gov.3,
            qp_status: qp_status.into(),
        });
    }
}

fn fall_reason(state: &SsState, cfg: &SimConfig) -> Option<String> {
    if !state.is_finite() {
        return Some("state diverged (non-finite)".into());
    }
    let hip = chain::ss_hip(&state.q, &state.dq, &cfg.params);
    if hip.pos.y < cfg.fall_hip_height {
        return Some(format!("hip height {:.3} below threshold", hip.pos.y));
    }
    if state.q[0].abs() > cfg.fall_torso_angle {
        return Some(format!("torso angle {:.3} beyond threshold", state.q[0]));
    }
    None
}

/// Execute `n_steps` full gait cycles from the gait-spec fixed point.
/// Falls and missed touchdowns end the run early with a diagnostic outcome;
/// hard numerical failures propagate as errors.
pub fn run_gait_cycles(cfg: &SimConfig, spec: &GaitSpec, n_steps: usize) -> Result<GaitLog> {
    cfg.validate()?;
    spec.validate()?;
    let p = &cfg.params;
    let mut logger = Logger {
        rows: Vec::new(),
        world_x: 0.0,
    };
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut state = spec.x_s0_state();
    let mut t = 0.0;
    let mut ctrl = SsController::new(cfg, spec)?;

    if n_steps == 0 {
        let r0 = spec.nominal_com_length(p, 0.0);
        logger.push_ss(
            t,
            &state,
            p,
            &Vec4::zeros(),
            Vector2::zeros(),
            (r0, r0, 0.0, 0.0),
        );
        return Ok(GaitLog {
            rows: logger.rows,
            steps,
            outcome: RunOutcome::Completed,
            seed: cfg.seed,
            n_steps_requested: 0,
        });
    }

    for step_idx in 0..n_steps {
        // ---- single support ----
        let mut log_err: Option<Error> = None;
        let ss = {
            let logger_ref = &mut logger;
            let err_ref = &mut log_err;
            drive_ss_phase(cfg, spec, &mut ctrl, &mut state, &mut t, |t, st, sample| {
                match ss_stance_reaction(st, &sample.u, p) {
                    Ok(lam) => logger_ref.push_ss(
                        t,
                        st,
                        p,
                        &sample.u,
                        lam,
                        (sample.w, sample.r, sample.v_lyap, sample.gamma),
                    ),
                    Err(e) => *err_ref = Some(e),
                }
            })?
        };
        if let Some(e) = log_err {
            return Err(e);
        }
        let event = match ss.end {
            SsEnd::Touchdown(ev) => ev,
            SsEnd::Failed(reason) => {
                return Ok(fell(logger, steps, cfg, n_steps, step_idx, t, reason))
            }
        };

        // ---- impact ----
        let t_touchdown = event.t;
        let (post, imp, x_land) = impact_and_swap(&event.state, p)?;
        let ext_pre = lift_ss(&event.state, p);
        logger.push_ext(
            t_touchdown,
            Phase::Impact,
            &ext_pre,
            &Vec4::zeros(),
            0.0,
            [imp.impulse[0], imp.impulse[1], imp.impulse[2], imp.impulse[3]],
            (ctrl.gov.w, ctrl.gov.r, ctrl.gov.last_v, ctrl.gov.last_gamma),
            "-",
        );

        let x_s0 = spec.x_s0_vector();
        let post_ss = post.restrict();
        let mut post_q_res: f64 = 0.0;
        let mut post_dq_res: f64 = 0.0;
        for i in 0..5 {
            post_q_res = post_q_res.max((post_ss.q[i] - x_s0[i]).abs());
            post_dq_res = post_dq_res.max((post_ss.dq[i] - x_s0[5 + i]).abs());
        }

        // ---- double support ----
        let x_target = lift_fixed_point(&x_s0, x_land, p);
        let gov_tuple = (ctrl.gov.w, ctrl.gov.r, ctrl.gov.last_v, ctrl.gov.last_gamma);
        let ds = {
            let logger_ref = &mut logger;
            drive_ds_phase(cfg, &post, &x_target, |k, cur, eta, lambda, status| {
                let u_ds = Vec4::new(eta[0], eta[1], eta[2], eta[3]);
                logger_ref.push_ext(
                    t_touchdown + (k + 1) as f64 * cfg.nmpc.dt,
                    Phase::Ds,
                    cur,
                    &u_ds,
                    eta[4],
                    lambda,
                    gov_tuple,
                    status,
                );
            })?
        };
        let t_ds_end = t_touchdown + cfg.ds_duration;
        if ds.exit.q[6] < cfg.fall_hip_height || ds.exit.q[0].abs() > cfg.fall_torso_angle {
            return Ok(fell(
                logger,
                steps,
                cfg,
                n_steps,
                step_idx,
                t_ds_end,
                "fell during double support".into(),
            ));
        }

        // ---- hand off to the next single-support phase ----
        let exit_ss = ds.exit.restrict();
        let mut exit_q_res: f64 = 0.0;
        let mut exit_dq_res: f64 = 0.0;
        for i in 0..5 {
            exit_q_res = exit_q_res.max((exit_ss.q[i] - x_s0[i]).abs());
            exit_dq_res = exit_dq_res.max((exit_ss.dq[i] - x_s0[5 + i]).abs());
        }
        steps.push(StepRecord {
            step: step_idx,
            t_touchdown,
            t_ds_end,
            post_impact_residual_q: post_q_res,
            post_impact_residual_dq: post_dq_res,
            ds_exit_residual_q: exit_q_res,
            ds_exit_residual_dq: exit_dq_res,
            min_lambda_n: ds.min_lambda_n,
            max_friction_ratio: ds.max_friction_ratio,
            erg_saturations: ss.erg_saturations,
            qp_fallbacks: ds.qp_fallbacks,
            impact_impulse: [
                imp.impulse[0],
                imp.impulse[1],
                imp.impulse[2],
                imp.impulse[3],
            ],
            mean_thrust: ds.mean_thrust,
            ds_foot_drift: ds.foot_drift,
            max_output_norm: ss.max_output_norm,
        });

        logger.world_x += x_land;
        state = exit_ss;
        t = t_ds_end;
    }

    Ok(GaitLog {
        rows: logger.rows,
        steps,
        outcome: RunOutcome::Completed,
        seed: cfg.seed,
        n_steps_requested: n_steps,
    })
}

fn fell(
    logger: Logger,
    steps: Vec<StepRecord>,
    cfg: &SimConfig,
    n_steps: usize,
    step: usize,
    t: f64,
    reason: String,
) -> GaitLog {
    GaitLog {
        rows: logger.rows,
        steps,
        outcome: RunOutcome::Fell { step, t, reason },
        seed: cfg.seed,
        n_steps_requested: n_steps,
    }
}

/// Outcome of one unlogged cycle (for the tuner): the double-support exit,
/// the post-impact state and step diagnostics.
pub struct CycleOutcome {
    pub ds_exit: SsState,
    pub post_impact: SsState,
    pub t_touchdown: f64,
    pub max_torque: f64,
    pub min_swing_clearance: f64,
    pub qp_fallbacks: usize,
}

/// Run one cycle (SS -> impact -> DS) through exactly the deployed
/// controllers, without logging. Falls and missed events come back as
/// `Err(Controller)` for the tuner to penalize.
pub fn run_single_cycle(
    cfg: &SimConfig,
    spec: &GaitSpec,
    start: &SsState,
) -> Result<CycleOutcome> {
    let p = &cfg.params;
    let mut state = *start;
    let mut t = 0.0;
    let mut ctrl = SsController::new(cfg, spec)?;
    let ss = drive_ss_phase(cfg, spec, &mut ctrl, &mut state, &mut t, |_, _, _| {})?;
    let event = match ss.end {
        SsEnd::Touchdown(ev) => ev,
        SsEnd::Failed(reason) => return Err(Error::Controller(reason)),
    };
    let (post, _, x_land) = impact_and_swap(&event.state, p)?;
    let x_target = lift_fixed_point(&spec.x_s0_vector(), x_land, p);
    let ds = drive_ds_phase(cfg, &post, &x_target, |_, _, _, _, _| {})?;
    Ok(CycleOutcome {
        ds_exit: ds.exit.restrict(),
        post_impact: post.restrict(),
        t_touchdown: event.t,
        max_torque: ss.max_torque,
        min_swing_clearance: ss.min_swing_clearance,
        qp_fallbacks: ds.qp_fallbacks,
    })
}
