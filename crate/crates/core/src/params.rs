use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the planar biped.
///
/// Masses are lumped point masses: torso mass at `l_t` from the hip along the
/// torso link, the hip mass at the hip joint, and each leg mass at the
/// midpoint of the tibia. `l_2b` (metatarsus) is carried for completeness but
/// unused by the planar foot-end map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    /// Mass of torso (kg).
    pub m_t: f64,
    /// Mass of hip (kg).
    pub m_h: f64,
    /// Mass of each leg (kg), lumped at the tibia midpoint.
    pub m_k: f64,
    /// Hip-to-torso length (m).
    pub l_t: f64,
    /// Hip-to-knee length (m).
    pub l_1: f64,
    /// Tibia length, knee to foot end (m).
    pub l_2a: f64,
    /// Metatarsus length (m); recorded but unused by the planar kinematics.
    pub l_2b: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
    /// Double-support constraint damping coefficient (1/s).
    pub d: f64,
    /// Static friction coefficient.
    pub mu_s: f64,
    /// Joint torque bound (N m).
    pub u_max: f64,
    /// Thrust bound (N).
    pub f_th_max: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            m_t: 0.3,
            m_h: 0.2,
            m_k: 0.1,
            l_t: 0.10,
            l_1: 0.18,
            l_2a: 0.32,
            l_2b: 0.32,
            g: 9.81,
            d: 5.0,
            mu_s: 0.8,
            u_max: 5.0,
            f_th_max: 15.0,
        }
    }
}

impl RobotParams {
    /// Total robot mass (kg).
    pub fn total_mass(&self) -> f64 {
        self.m_t + self.m_h + 2.0 * self.m_k
    }

    /// Maximum hip-to-foot reach (m).
    pub fn leg_reach(&self) -> f64 {
        self.l_1 + self.l_2a
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("m_t", self.m_t),
            ("m_h", self.m_h),
            ("m_k", self.m_k),
            ("l_t", self.l_t),
            ("l_1", self.l_1),
            ("l_2a", self.l_2a),
            ("l_2b", self.l_2b),
            ("g", self.g),
            ("u_max", self.u_max),
            ("f_th_max", self.f_th_max),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(self.mu_s > 0.0 && self.mu_s <= 1.5) {
            return Err(Error::InvalidParameter(format!(
                "mu_s must lie in (0, 1.5], got {}",
                self.mu_s
            )));
        }
        if !(self.d >= 0.0) || !self.d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "d must be non-negative, got {}",
                self.d
            )));
        }
        Ok(())
    }

    /// Load from a flat key-value TOML file (SI units).
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let params: RobotParams =
            toml::from_str(text).map_err(|e| Error::Config(format!("robot params: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RobotParams serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_table_values() {
        let p = RobotParams::default();
        p.validate().unwrap();
        assert_eq!(p.total_mass(), 0.7);
        assert_eq!(p.leg_reach(), 0.5);
    }

    #[test]
    fn rejects_nonpositive_mass() {
        let p = RobotParams {
            m_t: 0.0,
            ..RobotParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_mu_out_of_range() {
        let p = RobotParams {
            mu_s: 1.6,
            ..RobotParams::default()
        };
        assert!(p.validate().is_err());
        let p = RobotParams {
            mu_s: 0.0,
            ..RobotParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let p = RobotParams::default();
        let text = p.to_toml();
        let back = RobotParams::from_toml(&text).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = "m_t = 0.3\nbogus = 1.0";
        assert!(RobotParams::from_toml(text).is_err());
    }
}
