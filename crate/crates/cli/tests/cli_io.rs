//! Scenario/log IO behavior of the command layer.

use std::path::{Path, PathBuf};

use thrustwalk_cli::{cmd_check, cmd_run, compute_metrics, Scenario};
use thrustwalk_core::hybrid::GaitLog;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario_in(dir: &Path, steps: usize) -> Scenario {
    let mut sc = Scenario::default();
    sc.base_dir = workspace_root();
    sc.robot = "configs/robot.toml".into();
    sc.gait_spec = "assets/gait_default.json".into();
    sc.steps = steps;
    sc.out_dir = dir.display().to_string();
    sc
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("thrustwalk-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn zero_step_run_produces_valid_artifacts() {
    let dir = temp_dir("zero");
    let sc = scenario_in(&dir, 0);
    let art = cmd_run(&sc).unwrap();
    assert!(art.log.completed());
    assert!(art.report.pass, "report: {}", art.report.to_json());
    assert_eq!(art.report.steps_completed, 0);
    let text = std::fs::read_to_string(&art.csv_path).unwrap();
    let rows = GaitLog::rows_from_csv(&text).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn check_reproduces_the_run_report_exactly() {
    let dir = temp_dir("check");
    let sc = scenario_in(&dir, 3);
    let art = cmd_run(&sc).unwrap();
    let recheck = cmd_check(&art.csv_path, &sc).unwrap();
    assert_eq!(recheck.to_json(), art.report.to_json());
    assert!(recheck.pass);
}

#[test]
fn corrupted_normal_force_fails_the_friction_rule() {
    let dir = temp_dir("corrupt");
    let sc = scenario_in(&dir, 2);
    let art = cmd_run(&sc).unwrap();
    let text = std::fs::read_to_string(&art.csv_path).unwrap();
    // negate the lam_N1 column (index 22) of every DS row
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || !line.contains(",DS,") {
            out.push_str(line);
        } else {
            let mut fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            let v: f64 = fields[22].parse().unwrap();
            fields[22] = format!("{}", -v);
            out.push_str(&fields.join(","));
        }
        out.push('\n');
    }
    let bad_path = dir.join("corrupted.csv");
    std::fs::write(&bad_path, out).unwrap();
    let report = cmd_check(&bad_path, &sc).unwrap();
    assert!(!report.pass);
    let contact = report.rules.iter().find(|r| r.name == "ground_contact").unwrap();
    assert!(!contact.pass);
}

#[test]
fn truncated_log_reports_the_offending_line() {
    let dir = temp_dir("truncated");
    let sc = scenario_in(&dir, 1);
    let art = cmd_run(&sc).unwrap();
    let text = std::fs::read_to_string(&art.csv_path).unwrap();
    let n_lines = text.lines().count();
    // cut the last line in half
    let cut = text.len() - 40;
    let mut broken = text[..cut].to_string();
    broken.push('\n');
    let bad = dir.join("truncated.csv");
    std::fs::write(&bad, broken).unwrap();
    match cmd_check(&bad, &sc) {
        Err(thrustwalk_core::Error::LogParse { line, .. }) => {
            assert_eq!(line, n_lines, "error should name the last line");
        }
        other => panic!("expected LogParse error, got {other:?}"),
    }
}

#[test]
fn fixed_seed_runs_are_bitwise_identical() {
    let dir_a = temp_dir("repro-a");
    let dir_b = temp_dir("repro-b");
    let a = cmd_run(&scenario_in(&dir_a, 2)).unwrap();
    let b = cmd_run(&scenario_in(&dir_b, 2)).unwrap();
    let bytes_a = std::fs::read(&a.csv_path).unwrap();
    let bytes_b = std::fs::read(&b.csv_path).unwrap();
    assert_eq!(bytes_a, bytes_b);
    assert_eq!(
        std::fs::read(&a.metrics_path).unwrap(),
        std::fs::read(&b.metrics_path).unwrap()
    );
}

#[test]
fn low_friction_scenario_fails() {
    let dir = temp_dir("lowmu");
    // a private robot file with mu_s = 0.01
    let robot = thrustwalk_core::RobotParams {
        mu_s: 0.01,
        ..thrustwalk_core::RobotParams::default()
    };
    let robot_path = dir.join("robot_lowmu.toml");
    std::fs::write(&robot_path, robot.to_toml()).unwrap();
    let mut sc = scenario_in(&dir, 5);
    sc.robot = robot_path.display().to_string();
    let art = cmd_run(&sc).unwrap();
    assert!(
        !art.log.completed() || !art.report.pass,
        "low-friction run must fail"
    );
}

#[test]
fn metrics_from_rows_match_step_records() {
    let dir = temp_dir("stepmatch");
    let sc = scenario_in(&dir, 3);
    let art = cmd_run(&sc).unwrap();
    let cfg = sc.sim_config().unwrap();
    let spec = sc.load_gait_spec().unwrap();
    let report = compute_metrics(&art.log.rows, 3, &spec, &cfg.params, &cfg.erg.model).unwrap();
    assert_eq!(report.per_step.len(), art.log.steps.len());
    for (m, s) in report.per_step.iter().zip(&art.log.steps) {
        approx::assert_relative_eq!(m.exit_residual_q, s.ds_exit_residual_q, epsilon = 1e-12);
        approx::assert_relative_eq!(m.exit_residual_dq, s.ds_exit_residual_dq, epsilon = 1e-12);
        assert_eq!(m.erg_saturations, s.erg_saturations);
    }
}

#[test]
fn binary_runs_the_default_scenario() {
    let dir = temp_dir("bin");
    let root = workspace_root();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_thrustwalk"))
        .current_dir(&root)
        .args([
            "run",
            "--config",
            "configs/scenario_default.toml",
            "--steps",
            "2",
            "--out",
            &dir.display().to_string(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
}
