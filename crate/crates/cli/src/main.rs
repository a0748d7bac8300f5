use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thrustwalk_cli::{cmd_batch, cmd_check, cmd_run, cmd_tune, Scenario};
use thrustwalk_core::hybrid::RunOutcome;

/// Planar thruster-assisted biped: tune gaits, run walking experiments,
/// verify logged runs. Log verbosity via the RUST_LOG environment variable.
#[derive(Parser)]
#[command(name = "thrustwalk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonOverrides {
    /// Scenario file (TOML).
    #[arg(long, default_value = "configs/scenario_default.toml")]
    config: PathBuf,
    /// Override the gait-spec path from the scenario.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override the number of steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Disable the thruster channel (ablation).
    #[arg(long)]
    no_thrust: bool,
    /// Disable the reference governor (ablation).
    #[arg(long)]
    no_erg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Tune gait coefficients offline and write the tuned spec.
    Tune(CommonOverrides),
    /// Execute the walking scenario and export log + metrics.
    Run(CommonOverrides),
    /// Recompute metrics from an existing CSV log (no simulation).
    Check {
        #[command(flatten)]
        common: CommonOverrides,
        /// Log file produced by `run`.
        #[arg(long)]
        log: PathBuf,
    },
    /// Run several scenarios in parallel.
    Batch {
        /// Scenario files.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

fn load_scenario(common: &CommonOverrides) -> Result<Scenario, thrustwalk_core::Error> {
    let mut sc = Scenario::load(&common.config)?;
    if let Some(spec) = &common.spec {
        sc.gait_spec = spec.display().to_string();
    }
    if let Some(steps) = common.steps {
        sc.steps = steps;
    }
    if let Some(out) = &common.out {
        sc.out_dir = out.display().to_string();
    }
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    sc.no_thrust |= common.no_thrust;
    sc.no_erg |= common.no_erg;
    Ok(sc)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, thrustwalk_core::Error> {
    match cli.command {
        Command::Tune(common) => {
            let sc = load_scenario(&common)?;
            match cmd_tune(&sc) {
                Ok(art) => {
                    println!(
                        "tuned: objective {:.6} -> {:.6} in {} evaluations",
                        art.report.seed_objective,
                        art.report.best_objective,
                        art.report.evaluations
                    );
                    println!(
                        "exit residuals: {:.2e} rad, {:.2e} rad/s; endpoint consistency {:.2e}",
                        art.report.exit_residual_q,
                        art.report.exit_residual_dq,
                        art.report.endpoint_consistency
                    );
                    println!("spec written to {}", art.spec_path.display());
                    println!("history written to {}", art.history_path.display());
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("tuning failed: {e}");
                    Ok(ExitCode::from(3))
                }
            }
        }
        Command::Run(common) => {
            let sc = load_scenario(&common)?;
            let art = cmd_run(&sc)?;
            for rule in &art.report.rules {
                println!(
                    "{} {}: {}",
                    if rule.pass { "PASS" } else { "FAIL" },
                    rule.name,
                    rule.detail
                );
            }
            println!("log: {}", art.csv_path.display());
            println!("summary: {}", art.summary_path.display());
            println!("metrics: {}", art.metrics_path.display());
            match &art.log.outcome {
                RunOutcome::Completed if art.report.pass => Ok(ExitCode::SUCCESS),
                RunOutcome::Completed => Ok(ExitCode::from(3)),
                RunOutcome::Fell { step, t, reason } => {
                    eprintln!("fell at step {step}, t = {t:.3} s: {reason}");
                    if let Some(last) = art.log.rows.last() {
                        eprintln!("last state: q = {:?}, dq = {:?}", last.q, last.dq);
                    }
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Check { common, log } => {
            let sc = load_scenario(&common)?;
            let report = cmd_check(&log, &sc)?;
            for rule in &report.rules {
                println!(
                    "{} {}: {}",
                    if rule.pass { "PASS" } else { "FAIL" },
                    rule.name,
                    rule.detail
                );
            }
            println!("{}", report.to_json());
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Command::Batch { configs } => {
            let results = cmd_batch(&configs);
            let mut all_ok = true;
            for (path, result) in &results {
                match result {
                    Ok(true) => println!("PASS {}", path.display()),
                    Ok(false) => {
                        all_ok = false;
                        println!("FAIL {}", path.display());
                    }
                    Err(e) => {
                        all_ok = false;
                        println!("ERROR {}: {e}", path.display());
                    }
                }
            }
            Ok(if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
    }
}
