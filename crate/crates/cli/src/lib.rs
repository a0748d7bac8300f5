//! Library surface of the scenario runner: load scenarios, execute tuning
//! and walking experiments, export logs and verify them post hoc.

pub mod metrics;
pub mod scenario;

use std::path::{Path, PathBuf};

use thrustwalk_core::gait::{build_seed_spec, tune_coefficients, GaitSpec};
use thrustwalk_core::hybrid::sim::run_gait_cycles;
use thrustwalk_core::hybrid::{GaitLog, RunOutcome};
use thrustwalk_core::{Error, Result};

pub use metrics::{compute_metrics, MetricsReport};
pub use scenario::Scenario;

/// Artifacts of a completed `run` invocation.
pub struct RunArtifacts {
    pub log: GaitLog,
    pub report: MetricsReport,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub metrics_path: PathBuf,
}

fn ensure_out_dir(scenario: &Scenario) -> Result<PathBuf> {
    let dir = scenario.resolve(&scenario.out_dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Execute the scenario's walk, write the CSV log, the JSON summary and the
/// metrics report. The run "succeeds" when all steps complete without a
/// fall and every metric rule passes.
pub fn cmd_run(scenario: &Scenario) -> Result<RunArtifacts> {
    let cfg = scenario.sim_config()?;
    let spec = scenario.load_gait_spec()?;
    let log = run_gait_cycles(&cfg, &spec, scenario.steps)?;
    let report = compute_metrics(
        &log.rows,
        scenario.steps,
        &spec,
        &cfg.params,
        &cfg.erg.model,
    )?;

    let dir = ensure_out_dir(scenario)?;
    let csv_path = dir.join("walk.csv");
    let summary_path = dir.join("summary.json");
    let metrics_path = dir.join("metrics.json");
    std::fs::write(&csv_path, log.to_csv())?;
    std::fs::write(&summary_path, log.summary_json())?;
    std::fs::write(&metrics_path, report.to_json())?;
    if let RunOutcome::Fell { step, t, reason } = &log.outcome {
        log::warn!("run fell at step {step}, t = {t:.3}: {reason}");
    }
    Ok(RunArtifacts {
        log,
        report,
        csv_path,
        summary_path,
        metrics_path,
    })
}

/// Recompute the metrics of an existing CSV log (no simulation).
pub fn cmd_check(log_path: &Path, scenario: &Scenario) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(log_path)
        .map_err(|e| Error::Config(format!("{}: {e}", log_path.display())))?;
    let rows = GaitLog::rows_from_csv(&text)?;
    let cfg = scenario.sim_config()?;
    let spec = scenario.load_gait_spec()?;
    compute_metrics(&rows, scenario.steps, &spec, &cfg.params, &cfg.erg.model)
}

/// Artifacts of a tuning invocation.
pub struct TuneArtifacts {
    pub spec: GaitSpec,
    pub report: thrustwalk_core::gait::TuneReport,
    pub spec_path: PathBuf,
    pub history_path: PathBuf,
}

/// Tune gait coefficients from the scenario's seed geometry and write the
/// tuned spec plus the objective history.
pub fn cmd_tune(scenario: &Scenario) -> Result<TuneArtifacts> {
    let cfg = scenario.sim_config()?;
    let kp = [scenario.tuning.kp; 4];
    let kd = [scenario.tuning.kd; 4];
    // seed from the referenced gait spec when it exists, else from geometry
    let seed_path = scenario.resolve(&scenario.gait_spec);
    let seed = if seed_path.exists() {
        GaitSpec::load(&seed_path)?
    } else {
        build_seed_spec(&cfg.params, &scenario.tuning.geometry, kp, kd)?
    };
    let t_cfg = scenario.tuning_config();
    let (tuned, report) = tune_coefficients(&cfg, &seed, &t_cfg)?;

    let dir = ensure_out_dir(scenario)?;
    let spec_path = dir.join("gait_tuned.json");
    tuned.save(&spec_path)?;
    let history_path = dir.join("tune_history.csv");
    let mut hist = String::from("evaluation,best_objective\n");
    for (i, v) in report.history.iter().enumerate() {
        hist.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(&history_path, hist)?;
    Ok(TuneArtifacts {
        spec: tuned,
        report,
        spec_path,
        history_path,
    })
}

/// Run several scenarios in parallel; returns per-scenario pass flags.
pub fn cmd_batch(paths: &[PathBuf]) -> Vec<(PathBuf, std::result::Result<bool, String>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|path| {
                let path = path.clone();
                scope.spawn(move || {
                    let result = Scenario::load(&path)
                        .and_then(|sc| cmd_run(&sc))
                        .map(|art| art.log.completed() && art.report.pass)
                        .map_err(|e| e.to_string());
                    (path, result)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}
