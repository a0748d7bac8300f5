//! Hybrid walking machinery: phase integrators, impact map, touchdown
//! detection and the full single-support / impact / double-support cycle.

pub mod event;
pub mod impact;
pub mod integrate;
pub mod log;
pub mod sim;

pub use event::{detect_touchdown, swing_height, TouchdownEvent, TrajSample};
pub use impact::{impact_map, swap_legs, ImpactResult};
pub use integrate::{ds_accel, ss_accel, static_holding_torques, step_ds, step_ss, DsStepResult};
pub use log::{GaitLog, LogRow, Phase, RunOutcome, StepRecord};
pub use sim::{run_gait_cycles, run_single_cycle, CycleOutcome, ErgConfig, SimConfig};
