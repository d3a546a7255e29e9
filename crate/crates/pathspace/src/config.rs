//! Experiment configuration file format (JSON, versioned).

use serde::{Deserialize, Serialize};

use crate::ckf::CkfConfig;
use crate::error::HarnessError;
use crate::sim::{SensorModel, TrackSpec};
use crate::slam::PathSpaceConfig;
use crate::snapshot::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendSelection {
    Pathspace,
    Ckf,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub track: TrackSpec,
    pub sensor: SensorModel,
    pub backend: BackendSelection,
    pub pathspace: PathSpaceConfig,
    pub ckf: CkfConfig,
    pub laps: u32,
    pub seed: u64,
    /// Vehicle speed in m/s and frame period in seconds.
    pub speed: f64,
    pub dt: f64,
    /// Body-frame odometry noise standard deviations
    /// (forward m, lateral m, heading rad) per frame.
    pub odo_noise_std: [f64; 3],
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            track: TrackSpec::default(),
            sensor: SensorModel::default(),
            backend: BackendSelection::Both,
            pathspace: PathSpaceConfig::default(),
            ckf: CkfConfig::default(),
            laps: 5,
            seed: 1,
            speed: 5.0,
            dt: 0.15,
            odo_noise_std: [0.01, 0.002, 0.0005],
        }
    }
}

impl ExperimentConfig {
    /// The comparison setup used by the acceptance experiments: the default
    /// track sensed with a narrow short-range sensor, which leaves a band of
    /// hairpin-interior cones geometrically invisible.
    pub fn comparison_defaults() -> Self {
        let mut cfg = Self::default();
        cfg.sensor = SensorModel {
            max_range: 8.0,
            field_of_view: 60f64.to_radians(),
            position_noise_std: 0.1,
            detection_probability: 0.9,
        };
        cfg
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.laps == 0 {
            return Err(HarnessError::Config("laps must be >= 1".into()));
        }
        if self.speed <= 0.0 || self.dt <= 0.0 {
            return Err(HarnessError::Config("speed and dt must be positive".into()));
        }
        if self.odo_noise_std.iter().any(|s| *s < 0.0) {
            return Err(HarnessError::Config("odometry noise must be non-negative".into()));
        }
        self.sensor.validate()?;
        if self.pathspace.lambda <= 0.0 {
            return Err(HarnessError::Config("pathspace.lambda must be positive".into()));
        }
        if self.pathspace.budget < 5 {
            return Err(HarnessError::Config("pathspace.budget must be at least 5".into()));
        }
        if self.ckf.gate <= 0.0 {
            return Err(HarnessError::Config("ckf.gate must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn odo_noise_matrix(&self) -> nalgebra::Matrix3<f64> {
        let s = self.odo_noise_std;
        nalgebra::Matrix3::new(
            s[0] * s[0],
            0.0,
            0.0,
            0.0,
            s[1] * s[1],
            0.0,
            0.0,
            0.0,
            s[2] * s[2],
        )
    }
}
