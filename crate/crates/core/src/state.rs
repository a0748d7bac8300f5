use nalgebra::{SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec4 = SVector<f64, 4>;
pub type Vec5 = SVector<f64, 5>;
pub type Vec7 = SVector<f64, 7>;

/// Index of the absolute torso angle in `q_s`.
pub const IDX_QT: usize = 0;
/// Indices of the stance-leg (right) femur and knee angles.
pub const IDX_Q1R: usize = 1;
pub const IDX_Q2R: usize = 3;
/// Indices of the swing-leg (left) femur and knee angles.
pub const IDX_Q1L: usize = 2;
pub const IDX_Q2L: usize = 4;
/// Indices of the hip position in the extended coordinates.
pub const IDX_PHX: usize = 5;
pub const IDX_PHY: usize = 6;
/// Indices of the actuated coordinates `q_b = [q_1R, q_1L, q_2R, q_2L]`.
pub const ACTUATED: [usize; 4] = [IDX_Q1R, IDX_Q1L, IDX_Q2R, IDX_Q2L];

/// Single-support state: `q_s = [q_T, q_1R, q_1L, q_2R, q_2L]` with the
/// stance (right) foot pinned at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsState {
    pub q: Vec5,
    pub dq: Vec5,
}

/// Extended (unpinned) state: `q_e = [q_s; p_H]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtState {
    pub q: Vec7,
    pub dq: Vec7,
}

impl SsState {
    pub fn new(q: Vec5, dq: Vec5) -> Self {
        Self { q, dq }
    }

    pub fn zero() -> Self {
        Self {
            q: Vec5::zeros(),
            dq: Vec5::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.dq.iter()).all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState("non-finite single-support state".into()))
        }
    }

    /// Actuated coordinates `q_b`.
    pub fn qb(&self) -> Vec4 {
        Vec4::from_fn(|i, _| self.q[ACTUATED[i]])
    }

    pub fn dqb(&self) -> Vec4 {
        Vec4::from_fn(|i, _| self.dq[ACTUATED[i]])
    }

    /// Flattened `[q; dq]` (the 10-vector used for fixed points and metrics).
    pub fn flat(&self) -> SVector<f64, 10> {
        let mut out = SVector::<f64, 10>::zeros();
        out.fixed_rows_mut::<5>(0).copy_from(&self.q);
        out.fixed_rows_mut::<5>(5).copy_from(&self.dq);
        out
    }

    pub fn from_flat(x: &SVector<f64, 10>) -> Self {
        Self {
            q: x.fixed_rows::<5>(0).into_owned(),
            dq: x.fixed_rows::<5>(5).into_owned(),
        }
    }
}

impl ExtState {
    pub fn new(q: Vec7, dq: Vec7) -> Self {
        Self { q, dq }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.dq.iter()).all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState("non-finite extended state".into()))
        }
    }

    /// Restrict to the single-support coordinates (drops the hip position).
    pub fn restrict(&self) -> SsState {
        SsState {
            q: self.q.fixed_rows::<5>(0).into_owned(),
            dq: self.dq.fixed_rows::<5>(0).into_owned(),
        }
    }

    /// Build from single-support coordinates plus an explicit hip position
    /// and velocity.
    pub fn from_parts(ss: &SsState, p_h: Vector2<f64>, dp_h: Vector2<f64>) -> Self {
        let mut q = Vec7::zeros();
        let mut dq = Vec7::zeros();
        q.fixed_rows_mut::<5>(0).copy_from(&ss.q);
        dq.fixed_rows_mut::<5>(0).copy_from(&ss.dq);
        q[IDX_PHX] = p_h.x;
        q[IDX_PHY] = p_h.y;
        dq[IDX_PHX] = dp_h.x;
        dq[IDX_PHY] = dp_h.y;
        Self { q, dq }
    }

    pub fn hip_position(&self) -> Vector2<f64> {
        Vector2::new(self.q[IDX_PHX], self.q[IDX_PHY])
    }

    pub fn hip_velocity(&self) -> Vector2<f64> {
        Vector2::new(self.dq[IDX_PHX], self.dq[IDX_PHY])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restrict_matches_prefix() {
        let mut q = Vec7::zeros();
        let mut dq = Vec7::zeros();
        for i in 0..7 {
            q[i] = i as f64 * 0.1;
            dq[i] = -(i as f64) * 0.2;
        }
        let ext = ExtState::new(q, dq);
        let ss = ext.restrict();
        for i in 0..5 {
            assert_eq!(ss.q[i], q[i]);
            assert_eq!(ss.dq[i], dq[i]);
        }
    }

    #[test]
    fn finite_check_catches_nan() {
        let mut s = SsState::zero();
        s.dq[2] = f64::NAN;
        assert!(s.check_finite().is_err());
    }

    #[test]
    fn flat_round_trip() {
        let s = SsState::new(
            Vec5::new(0.1, -0.2, 0.3, -0.4, 0.5),
            Vec5::new(1.0, 2.0, 3.0, 4.0, 5.0),
        );
        assert_eq!(SsState::from_flat(&s.flat()), s);
    }
}
