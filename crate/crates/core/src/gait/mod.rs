//! Gait design: Bezier-parameterized desired outputs, the phase variable,
//! the feedback-linearizing tracking controller, and offline coefficient
//! tuning toward an impact-invariant fixed point.

pub mod bezier;
pub mod ik;
pub mod nelder_mead;
pub mod outputs;
pub mod seed;
pub mod tune;

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::RobotParams;
use crate::state::SsState;

use bezier::BezierSet;
pub use outputs::{
    eval_phase, fbl_control, fbl_target_accel, output_and_derivatives, phase_variable,
    OutputData, PhaseVariable,
};
pub use seed::{build_seed_spec, manifold_velocity, SeedGeometry};
pub use tune::{apply_decision, cycle_objective, tune_coefficients, TuneReport, TuningConfig};

/// Desired-trajectory specification of one walking step: Bezier output
/// coefficients over the normalized phase, the phase-variable range,
/// tracking gains, and the target fixed point `x_s0` each step restarts at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSpec {
    pub version: u32,
    pub phase_variable: PhaseVariable,
    /// `[theta_minus, theta_plus]`.
    pub theta_range: [f64; 2],
    /// Diagonal output tracking gains (1/s^2).
    pub kp: [f64; 4],
    /// Diagonal output damping gains (1/s).
    pub kd: [f64; 4],
    /// 4 x (M+1) control values of the desired actuated coordinates.
    pub bezier: Vec<Vec<f64>>,
    /// Fixed-point configuration `[q_T, q_1R, q_1L, q_2R, q_2L]`.
    pub x_s0_q: [f64; 5],
    /// Fixed-point velocities.
    pub x_s0_dq: [f64; 5],
}

impl GaitSpec {
    pub fn bezier_set(&self) -> BezierSet {
        BezierSet::from_matrix(&self.bezier)
    }

    pub fn x_s0_vector(&self) -> SVector<f64, 10> {
        let mut v = SVector::<f64, 10>::zeros();
        for i in 0..5 {
            v[i] = self.x_s0_q[i];
            v[5 + i] = self.x_s0_dq[i];
        }
        v
    }

    pub fn x_s0_state(&self) -> SsState {
        SsState::from_flat(&self.x_s0_vector())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_range[1] > self.theta_range[0]) {
            return Err(Error::Config(format!(
                "theta range must be increasing, got {:?}",
                self.theta_range
            )));
        }
        if self.bezier.len() != 4 {
            return Err(Error::Config(format!(
                "expected 4 Bezier rows, got {}",
                self.bezier.len()
            )));
        }
        let cols = self.bezier[0].len();
        if cols < 2 || self.bezier.iter().any(|r| r.len() != cols) {
            return Err(Error::Config("ragged or degenerate Bezier matrix".into()));
        }
        if self.kp.iter().chain(self.kd.iter()).any(|&g| !(g > 0.0)) {
            return Err(Error::Config("gains must be strictly positive".into()));
        }
        if self
            .x_s0_q
            .iter()
            .chain(self.x_s0_dq.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("non-finite fixed point".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("GaitSpec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GaitSpec =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("gait spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Nominal COM-length profile of the gait at phase `s`, evaluated on the
    /// output manifold with the fixed point's torso angle.
    pub fn nominal_com_length(&self, p: &RobotParams, s: f64) -> f64 {
        let qb = self.bezier_set().eval(s.clamp(0.0, 1.0));
        let mut q = crate::state::Vec5::zeros();
        q[0] = self.x_s0_q[0];
        for (row, &idx) in crate::state::ACTUATED.iter().enumerate() {
            q[idx] = qb[row];
        }
        let st = SsState::new(q, crate::state::Vec5::zeros());
        crate::model::com_ss(&st, p).pos.norm()
    }
}
