//! Scenario files: everything one walking experiment needs, in one TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thrustwalk_core::erg::VlipModel;
use thrustwalk_core::gait::{GaitSpec, SeedGeometry, TuningConfig};
use thrustwalk_core::hybrid::sim::{ErgConfig, SimConfig};
use thrustwalk_core::nmpc::NmpcConfig;
use thrustwalk_core::params::RobotParams;
use thrustwalk_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErgSection {
    pub enabled: bool,
    pub kappa: f64,
    /// Equivalent pendulum mass; 0 means "use the total robot mass".
    pub m_v: f64,
    pub kp_v: f64,
    pub kd_v: f64,
    pub u_v_min: f64,
    pub u_v_max: f64,
    pub l_min: f64,
    pub l_max: f64,
}

impl Default for ErgSection {
    fn default() -> Self {
        Self {
            enabled: true,
            kappa: 100.0,
            m_v: 0.0,
            kp_v: 100.0,
            kd_v: 20.0,
            u_v_min: -10.0,
            u_v_max: 30.0,
            l_min: 0.25,
            l_max: 0.52,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub ss_dt: f64,
    pub control_dt: f64,
    pub ds_inner_dt: f64,
    pub ds_duration: f64,
    pub max_ss_time: f64,
    pub fall_hip_height: f64,
    pub fall_torso_angle: f64,
    pub touchdown_tol: f64,
    pub arm_time: f64,
    pub min_touchdown_phase: f64,
    pub scuff_depth: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::new(RobotParams::default());
        Self {
            ss_dt: d.ss_dt,
            control_dt: d.control_dt,
            ds_inner_dt: d.ds_inner_dt,
            ds_duration: d.ds_duration,
            max_ss_time: d.max_ss_time,
            fall_hip_height: d.fall_hip_height,
            fall_torso_angle: d.fall_torso_angle,
            touchdown_tol: d.touchdown_tol,
            arm_time: d.arm_time,
            min_touchdown_phase: d.min_touchdown_phase,
            scuff_depth: d.scuff_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSection {
    pub max_evals: usize,
    pub restarts: usize,
    pub geometry: SeedGeometry,
    pub kp: f64,
    pub kd: f64,
}

impl Default for TuningSection {
    fn default() -> Self {
        Self {
            max_evals: 2400,
            restarts: 2,
            geometry: SeedGeometry::default(),
            kp: 400.0,
            kd: 40.0,
        }
    }
}

/// One experiment: file references, step count, controller settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    /// Robot parameter file (TOML), relative to this scenario file.
    pub robot: String,
    /// Gait specification (JSON), relative to this scenario file; tuned
    /// output lands next to it for `tune`.
    pub gait_spec: String,
    pub steps: usize,
    pub seed: u64,
    pub out_dir: String,
    pub no_thrust: bool,
    pub no_erg: bool,
    pub sim: SimSection,
    pub erg: ErgSection,
    pub nmpc: NmpcConfig,
    pub tuning: TuningSection,
    /// Directory the relative paths resolve against (set on load).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            robot: "configs/robot.toml".into(),
            gait_spec: "assets/gait_default.json".into(),
            steps: 5,
            seed: 42,
            out_dir: "out".into(),
            no_thrust: false,
            no_erg: false,
            sim: SimSection::default(),
            erg: ErgSection::default(),
            nmpc: NmpcConfig::default(),
            tuning: TuningSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut sc: Scenario =
            toml::from_str(&text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        sc.base_dir = path
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("."));
        if sc.steps > 10_000 {
            return Err(Error::Config("unreasonable step count".into()));
        }
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn robot_params(&self) -> Result<RobotParams> {
        RobotParams::load(&self.resolve(&self.robot))
    }

    pub fn load_gait_spec(&self) -> Result<GaitSpec> {
        GaitSpec::load(&self.resolve(&self.gait_spec))
    }

    /// Assemble the simulator configuration (loads the robot file).
    pub fn sim_config(&self) -> Result<SimConfig> {
        let params = self.robot_params()?;
        let m_v = if self.erg.m_v > 0.0 {
            self.erg.m_v
        } else {
            params.total_mass()
        };
        let mut nmpc = self.nmpc.clone();
        nmpc.no_thrust = self.no_thrust || nmpc.no_thrust;
        let cfg = SimConfig {
            params,
            ss_dt: self.sim.ss_dt,
            control_dt: self.sim.control_dt,
            ds_inner_dt: self.sim.ds_inner_dt,
            ds_duration: self.sim.ds_duration,
            nmpc,
            erg: ErgConfig {
                enabled: self.erg.enabled && !self.no_erg,
                kappa: self.erg.kappa,
                model: VlipModel {
                    m_v,
                    kp_v: self.erg.kp_v,
                    kd_v: self.erg.kd_v,
                    u_v_bounds: [self.erg.u_v_min, self.erg.u_v_max],
                    l_bounds: [self.erg.l_min, self.erg.l_max],
                },
            },
            max_ss_time: self.sim.max_ss_time,
            fall_hip_height: self.sim.fall_hip_height,
            fall_torso_angle: self.sim.fall_torso_angle,
            touchdown_tol: self.sim.touchdown_tol,
            arm_time: self.sim.arm_time,
            min_touchdown_phase: self.sim.min_touchdown_phase,
            scuff_depth: self.sim.scuff_depth,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tuning_config(&self) -> TuningConfig {
        TuningConfig {
            max_evals: self.tuning.max_evals,
            restarts: self.tuning.restarts,
            seed: self.seed,
            ..TuningConfig::default()
        }
    }
}
