//! End-to-end walking behavior with the shipped tuned gait.

use std::path::Path;

use thrustwalk_core::gait::{output_and_derivatives, GaitSpec};
use thrustwalk_core::hybrid::sim::{run_gait_cycles, SimConfig};
use thrustwalk_core::hybrid::{Phase, RunOutcome};
use thrustwalk_core::params::RobotParams;
use thrustwalk_core::state::SsState;

fn asset_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/gait_default.json")
}

fn setup() -> (SimConfig, GaitSpec) {
    let p = RobotParams::default();
    let spec = GaitSpec::load(&asset_path()).expect("shipped gait spec");
    (SimConfig::new(p), spec)
}

#[test]
fn zero_steps_logs_only_the_initial_state() {
    let (cfg, spec) = setup();
    let log = run_gait_cycles(&cfg, &spec, 0).unwrap();
    assert_eq!(log.rows.len(), 1);
    assert!(log.steps.is_empty());
    assert!(log.completed());
    assert_eq!(log.rows[0].t, 0.0);
}

#[test]
fn five_steps_close_the_limit_cycle() {
    let (cfg, spec) = setup();
    let log = run_gait_cycles(&cfg, &spec, 5).unwrap();
    assert!(log.completed(), "outcome: {:?}", log.outcome);
    assert_eq!(log.steps.len(), 5);
    for s in &log.steps {
        assert!(
            s.ds_exit_residual_q < 1e-3,
            "step {} exit q residual {}",
            s.step,
            s.ds_exit_residual_q
        );
        assert!(
            s.ds_exit_residual_dq < 1e-2,
            "step {} exit dq residual {}",
            s.step,
            s.ds_exit_residual_dq
        );
    }
}

#[test]
fn ds_exit_states_lie_on_the_zero_dynamics_set() {
    // hybrid invariance: every new single-support phase starts with small
    // outputs and output rates
    let (cfg, spec) = setup();
    let log = run_gait_cycles(&cfg, &spec, 3).unwrap();
    assert!(log.completed());
    let p = &cfg.params;
    // reconstruct each SS start from the first SS row after a DS row
    let mut prev_phase = Phase::Ss;
    for row in &log.rows {
        if row.phase == Phase::Ss && prev_phase == Phase::Ds {
            let mut q = thrustwalk_core::state::Vec5::zeros();
            let mut dq = thrustwalk_core::state::Vec5::zeros();
            for i in 0..5 {
                q[i] = row.q[i];
                dq[i] = row.dq[i];
            }
            let out = output_and_derivatives(&SsState::new(q, dq), &spec, p).unwrap();
            assert!(out.y.norm() < 1e-3, "|y| at SS start = {}", out.y.norm());
            assert!(out.dy.norm() < 1e-2, "|dy| at SS start = {}", out.dy.norm());
        }
        prev_phase = row.phase;
    }
}

#[test]
fn exactly_one_impact_row_between_phases_and_time_is_monotone() {
    let (cfg, spec) = setup();
    let log = run_gait_cycles(&cfg, &spec, 3).unwrap();
    let mut impacts = 0;
    let mut last_t = f64::NEG_INFINITY;
    let mut prev: Option<Phase> = None;
    for row in &log.rows {
        assert!(row.t >= last_t, "time went backwards at t = {}", row.t);
        last_t = row.t;
        if row.phase == Phase::Impact {
            impacts += 1;
            assert_eq!(prev, Some(Phase::Ss), "impact must follow single support");
        }
        if let Some(Phase::Impact) = prev {
            assert_eq!(row.phase, Phase::Ds, "double support must follow impact");
        }
        prev = Some(row.phase);
    }
    assert_eq!(impacts, 3);
}

#[test]
fn friction_cone_holds_at_every_ds_row() {
    let (cfg, spec) = setup();
    let log = run_gait_cycles(&cfg, &spec, 5).unwrap();
    assert!(log.completed());
    let mu = cfg.params.mu_s;
    let mut ds_rows = 0;
    for row in &log.rows {
        if row.phase != Phase::Ds {
            continue;
        }
        ds_rows += 1;
        for foot in 0..2 {
            let l_t = row.lambda[2 * foot];
            let l_n = row.lambda[2 * foot + 1];
            assert!(l_n > 0.0, "non-positive normal force {l_n} at t = {}", row.t);
            assert!(
                (l_t / l_n).abs() < mu,
                "friction ratio {} at t = {}",
                (l_t / l_n).abs(),
                row.t
            );
        }
    }
    assert_eq!(ds_rows, 5 * cfg.nmpc.horizon);
}

#[test]
fn perturbed_start_still_walks_five_steps() {
    let (cfg, mut spec) = setup();
    for v in spec.x_s0_dq.iter_mut() {
        *v *= 1.05;
    }
    let log = run_gait_cycles(&cfg, &spec, 5).unwrap();
    assert!(log.completed(), "outcome: {:?}", log.outcome);
    assert_eq!(log.steps.len(), 5);
}

#[test]
fn identical_config_reproduces_identical_logs() {
    let (cfg, spec) = setup();
    let a = run_gait_cycles(&cfg, &spec, 2).unwrap();
    let b = run_gait_cycles(&cfg, &spec, 2).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.summary_json(), b.summary_json());
}

#[test]
fn touchdown_time_is_stable_under_substep_halving() {
    let (cfg, spec) = setup();
    let mut cfg_fine = cfg.clone();
    cfg_fine.ss_dt = 5e-5;
    let a = run_gait_cycles(&cfg, &spec, 1).unwrap();
    let b = run_gait_cycles(&cfg_fine, &spec, 1).unwrap();
    assert!(a.completed() && b.completed());
    let dt = (a.steps[0].t_touchdown - b.steps[0].t_touchdown).abs();
    assert!(dt < 1e-6, "touchdown time shifted by {dt:.3e} s");
}

#[test]
fn thrust_ablation_degrades_the_walk() {
    let (cfg, spec) = setup();
    let base = run_gait_cycles(&cfg, &spec, 5).unwrap();
    let mut cfg_nt = cfg.clone();
    cfg_nt.nmpc.no_thrust = true;
    let ablated = run_gait_cycles(&cfg_nt, &spec, 5).unwrap();
    let mean = |log: &thrustwalk_core::hybrid::GaitLog| {
        let n = log.steps.len().max(1) as f64;
        log.steps.iter().map(|s| s.ds_exit_residual_dq).sum::<f64>() / n
    };
    match ablated.outcome {
        RunOutcome::Fell { .. } => {}
        RunOutcome::Completed => {
            assert!(
                mean(&ablated) > mean(&base),
                "ablated mean residual {} vs baseline {}",
                mean(&ablated),
                mean(&base)
            );
        }
    }
}
