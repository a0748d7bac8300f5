//! Simulation and control library for a planar thruster-assisted bipedal
//! robot: single-support walking with feedback-linearized gait tracking
//! filtered by an explicit reference governor, a two-point inelastic impact
//! map, and a predictive double-support controller that exploits the torso
//! thruster to restore the gait's initial condition every step.

pub mod erg;
pub mod error;
pub mod gait;
pub mod hybrid;
pub mod model;
pub mod nmpc;
pub mod params;
pub mod state;

pub use error::{Error, Result};
pub use params::RobotParams;
pub use state::{ExtState, SsState};
