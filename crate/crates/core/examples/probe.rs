// regenerate the shipped gait asset with the current pipeline
use thrustwalk_core::gait::{build_seed_spec, tune_coefficients, SeedGeometry, TuningConfig};
use thrustwalk_core::hybrid::sim::{run_gait_cycles, SimConfig};
use thrustwalk_core::params::RobotParams;

fn main() {
    let p = RobotParams::default();
    let geo = SeedGeometry { step_length: 0.16, hip_speed: 0.55, ..SeedGeometry::default() };
    let seed = build_seed_spec(&p, &geo, [400.0; 4], [40.0; 4]).unwrap();
    let cfg = SimConfig::new(p.clone());
    let args: Vec<String> = std::env::args().collect();
    let seed_arg: u64 = args.get(1).map(|v| v.parse().unwrap()).unwrap_or(0);
    let evals: usize = args.get(2).map(|v| v.parse().unwrap()).unwrap_or(1600);
    let restarts: usize = args.get(3).map(|v| v.parse().unwrap()).unwrap_or(3);
    let t_cfg = TuningConfig { max_evals: evals, restarts, seed: seed_arg, ..TuningConfig::default() };
    let t0 = std::time::Instant::now();
    let (tuned, report) = tune_coefficients(&cfg, &seed, &t_cfg).unwrap();
    println!("tuned in {:.0}s: {} -> {}", t0.elapsed().as_secs_f64(), report.seed_objective, report.best_objective);
    println!("exit residuals q {:.5} dq {:.4}, endpoint {:.4}", report.exit_residual_q, report.exit_residual_dq, report.endpoint_consistency);
    let log = run_gait_cycles(&cfg, &tuned, 5).unwrap();
    println!("5 steps: {:?}", log.outcome);
    let mut ok = log.completed();
    for s in &log.steps {
        println!("step {}: exit q {:.5} dq {:.4} ratio {:.3} minN {:.2} thrust {:.1}",
            s.step, s.ds_exit_residual_q, s.ds_exit_residual_dq, s.max_friction_ratio, s.min_lambda_n, s.mean_thrust);
        ok &= s.ds_exit_residual_q < 1e-3 && s.ds_exit_residual_dq < 1e-2;
    }
    let mean_thrust = log.steps.iter().map(|s| s.mean_thrust).sum::<f64>() / log.steps.len().max(1) as f64;
    if ok && mean_thrust > 2.0 {
        tuned.save(std::path::Path::new("assets/gait_default.json")).unwrap();
        println!("asset saved (mean thrust {mean_thrust:.1})");
    } else {
        println!("NOT saved: tolerances or thrust usage not met (thrust {mean_thrust:.1})");
    }
}
