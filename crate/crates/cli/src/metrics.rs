//! Acceptance metrics computed from the sample log alone, so a written CSV
//! can be re-verified without re-simulation.

use serde::{Deserialize, Serialize};
use thrustwalk_core::erg::{vlip_control_raw, VlipModel};
use thrustwalk_core::gait::GaitSpec;
use thrustwalk_core::hybrid::{LogRow, Phase};
use thrustwalk_core::model;
use thrustwalk_core::params::RobotParams;
use thrustwalk_core::state::{SsState, Vec5};
use thrustwalk_core::{Error, Result};

pub const HYBRID_TOL_Q: f64 = 1e-3;
pub const HYBRID_TOL_DQ: f64 = 1e-2;
pub const CLOSURE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleResult {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub exit_residual_q: f64,
    pub exit_residual_dq: f64,
    pub min_lambda_n: f64,
    pub max_friction_ratio: f64,
    pub erg_saturations: usize,
    /// Distance of this step's start state to the previous one (weighted
    /// inf-norm); zero for the first step.
    pub closure_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub per_step: Vec<StepMetrics>,
    pub rules: Vec<RuleResult>,
    pub pass: bool,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

fn row_ss_state(row: &LogRow) -> SsState {
    let mut q = Vec5::zeros();
    let mut dq = Vec5::zeros();
    for i in 0..5 {
        q[i] = row.q[i];
        dq[i] = row.dq[i];
    }
    SsState::new(q, dq)
}

/// Weighted inf-norm distance between two single-support states
/// (velocities scaled to the position tolerance ratio).
fn state_distance(a: &SsState, b: &SsState) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..5 {
        d = d.max((a.q[i] - b.q[i]).abs());
        d = d.max((a.dq[i] - b.dq[i]).abs() * (HYBRID_TOL_Q / HYBRID_TOL_DQ));
    }
    d
}

/// Recompute all acceptance metrics from the log rows plus the scenario
/// inputs. `cmd_run` and `cmd_check` both go through this function, so a
/// written log re-verifies to the identical report.
pub fn compute_metrics(
    rows: &[LogRow],
    steps_requested: usize,
    spec: &GaitSpec,
    params: &RobotParams,
    erg_model: &VlipModel,
) -> Result<MetricsReport> {
    if rows.is_empty() {
        return Err(Error::LogParse {
            line: 1,
            msg: "log has no rows".into(),
        });
    }
    let x_s0 = spec.x_s0_state();

    // segment the log into steps: each completed step ends with a DS block
    let mut per_step: Vec<StepMetrics> = Vec::new();
    let mut ss_starts: Vec<SsState> = Vec::new();
    let mut erg_sat_current = 0usize;
    let mut in_ds = false;
    let mut ds_min_n = f64::INFINITY;
    let mut ds_max_ratio: f64 = 0.0;
    let mut contact_ok = true;
    let mut contact_detail = String::new();
    let mut last_ds_row: Option<&LogRow> = None;
    let mut expecting_ss_start = true;

    for row in rows {
        match row.phase {
            Phase::Ss => {
                if in_ds {
                    // DS block just ended: close out the step
                    let exit = row_ss_state(last_ds_row.expect("ds rows exist"));
                    let mut rq: f64 = 0.0;
                    let mut rdq: f64 = 0.0;
                    for i in 0..5 {
                        rq = rq.max((exit.q[i] - x_s0.q[i]).abs());
                        rdq = rdq.max((exit.dq[i] - x_s0.dq[i]).abs());
                    }
                    per_step.push(StepMetrics {
                        step: per_step.len(),
                        exit_residual_q: rq,
                        exit_residual_dq: rdq,
                        min_lambda_n: ds_min_n,
                        max_friction_ratio: ds_max_ratio,
                        erg_saturations: erg_sat_current,
                        closure_distance: 0.0,
                    });
                    in_ds = false;
                    ds_min_n = f64::INFINITY;
                    ds_max_ratio = 0.0;
                    erg_sat_current = 0;
                    expecting_ss_start = true;
                }
                if expecting_ss_start {
                    ss_starts.push(row_ss_state(row));
                    expecting_ss_start = false;
                }
                // ERG saturation recount from the logged state and w
                let st = row_ss_state(row);
                let x_v = thrustwalk_core::erg::vlip_state(&st, params);
                let com = model::com_ss(&st, params);
                let cos_incl = (com.pos.y / com.pos.norm()).clamp(-1.0, 1.0);
                let raw = vlip_control_raw(&x_v, row.w, erg_model, params.g, cos_incl);
                if raw < erg_model.u_v_bounds[0] - 1e-12 || raw > erg_model.u_v_bounds[1] + 1e-12 {
                    erg_sat_current += 1;
                }
            }
            Phase::Impact => {}
            Phase::Ds => {
                in_ds = true;
                last_ds_row = Some(row);
                for foot in 0..2 {
                    let l_t = row.lambda[2 * foot];
                    let l_n = row.lambda[2 * foot + 1];
                    ds_min_n = ds_min_n.min(l_n);
                    if l_n <= 0.0 {
                        contact_ok = false;
                        contact_detail = format!("lambda_N = {l_n} at t = {}", row.t);
                    } else {
                        let ratio = (l_t / l_n).abs();
                        ds_max_ratio = ds_max_ratio.max(ratio);
                        if ratio >= params.mu_s {
                            contact_ok = false;
                            contact_detail = format!("|lambda_T/lambda_N| = {ratio} at t = {}", row.t);
                        }
                    }
                }
            }
        }
    }
    // a trailing DS block (log ends right at a step boundary) also closes a step
    if in_ds {
        let exit = row_ss_state(last_ds_row.expect("ds rows exist"));
        let mut rq: f64 = 0.0;
        let mut rdq: f64 = 0.0;
        for i in 0..5 {
            rq = rq.max((exit.q[i] - x_s0.q[i]).abs());
            rdq = rdq.max((exit.dq[i] - x_s0.dq[i]).abs());
        }
        per_step.push(StepMetrics {
            step: per_step.len(),
            exit_residual_q: rq,
            exit_residual_dq: rdq,
            min_lambda_n: ds_min_n,
            max_friction_ratio: ds_max_ratio,
            erg_saturations: erg_sat_current,
            closure_distance: 0.0,
        });
    }

    // limit-cycle closure: distances between successive step-start states
    for k in 1..ss_starts.len() {
        let d = state_distance(&ss_starts[k], &ss_starts[k - 1]);
        if let Some(m) = per_step.get_mut(k) {
            m.closure_distance = d;
        }
    }

    let steps_completed = per_step.len();
    let mut rules = Vec::new();

    let completion_pass = steps_completed >= steps_requested;
    rules.push(RuleResult {
        name: "step_completion".into(),
        pass: completion_pass,
        value: steps_completed as f64,
        threshold: steps_requested as f64,
        detail: format!("{steps_completed} of {steps_requested} steps completed"),
    });

    let worst_q = per_step
        .iter()
        .map(|s| s.exit_residual_q)
        .fold(0.0f64, f64::max);
    let worst_dq = per_step
        .iter()
        .map(|s| s.exit_residual_dq)
        .fold(0.0f64, f64::max);
    let hybrid_pass = if per_step.is_empty() {
        steps_requested == 0
    } else {
        worst_q < HYBRID_TOL_Q && worst_dq < HYBRID_TOL_DQ
    };
    rules.push(RuleResult {
        name: "hybrid_invariance".into(),
        pass: hybrid_pass,
        value: worst_q.max(worst_dq * (HYBRID_TOL_Q / HYBRID_TOL_DQ)),
        threshold: HYBRID_TOL_Q,
        detail: format!(
            "worst exit residuals: {worst_q:.2e} rad, {worst_dq:.2e} rad/s"
        ),
    });

    let min_n = per_step
        .iter()
        .map(|s| s.min_lambda_n)
        .fold(f64::INFINITY, f64::min);
    let max_ratio = per_step
        .iter()
        .map(|s| s.max_friction_ratio)
        .fold(0.0f64, f64::max);
    rules.push(RuleResult {
        name: "ground_contact".into(),
        pass: contact_ok && (!per_step.is_empty() || steps_requested == 0),
        value: max_ratio,
        threshold: params.mu_s,
        detail: if contact_ok {
            format!("min lambda_N = {min_n:.3} N, max |T/N| = {max_ratio:.3}")
        } else {
            contact_detail
        },
    });

    let worst_closure = per_step
        .iter()
        .skip(1)
        .map(|s| s.closure_distance)
        .fold(0.0f64, f64::max);
    let closure_pass = steps_completed < 2 || worst_closure < CLOSURE_TOL;
    rules.push(RuleResult {
        name: "limit_cycle_closure".into(),
        pass: closure_pass,
        value: worst_closure,
        threshold: CLOSURE_TOL,
        detail: format!("worst successive start-state distance {worst_closure:.2e}"),
    });

    let pass = rules.iter().all(|r| r.pass);
    Ok(MetricsReport {
        steps_requested,
        steps_completed,
        per_step,
        rules,
        pass,
    })
}
