//! Scenario files (TOML).
//!
//! ```toml
//! duration = 10.0          # seconds, > 0
//! cycle_rate = 20.0        # Hz, 1..=50 (default 20)
//! seed = 7                 # default 0
//! stamp_epoch = 0.0        # seconds added to every stamp (default 0)
//!
//! [detection_noise]        # standard deviations, all default 0
//! range = 0.1              # m
//! azimuth = 0.002          # rad
//! elevation = 0.002        # rad
//! range_rate = 0.05        # m/s
//!
//! [[objects]]
//! position = [40.0, -3.5, 0.5]   # m
//! velocity = [-13.9, 0.0]        # m/s
//! acceleration = [0.0, 0.0]      # m/s², default 0
//! classification = "CAR"         # default UNKNOWN
//! shape = [4.5, 1.8]             # length, width in m
//! detections_per_cycle = 4       # 0..=16, default 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Classification, MAX_OBJECTS};

pub const MAX_DETECTIONS_PER_OBJECT: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionNoise {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub range_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioObject {
    pub position: [f64; 3],
    pub velocity: [f64; 2],
    #[serde(default)]
    pub acceleration: [f64; 2],
    #[serde(default = "unknown_class")]
    pub classification: Classification,
    #[serde(default = "default_shape")]
    pub shape: [f64; 2],
    #[serde(default = "one")]
    pub detections_per_cycle: u32,
}

fn unknown_class() -> Classification {
    Classification::Unknown
}

fn default_shape() -> [f64; 2] {
    [4.5, 1.8]
}

fn one() -> u32 {
    1
}

fn default_rate() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration: f64,
    #[serde(default = "default_rate")]
    pub cycle_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stamp_epoch: f64,
    #[serde(default)]
    pub detection_noise: DetectionNoise,
    #[serde(default)]
    pub objects: Vec<ScenarioObject>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if !(1.0..=50.0).contains(&self.cycle_rate) {
            return bad(format!("cycle_rate must be within [1, 50] Hz, got {}", self.cycle_rate));
        }
        if !self.stamp_epoch.is_finite() || self.stamp_epoch < 0.0 {
            return bad(format!("stamp_epoch must be >= 0, got {}", self.stamp_epoch));
        }
        let n = &self.detection_noise;
        for (name, v) in [("range", n.range), ("azimuth", n.azimuth), ("elevation", n.elevation), ("range_rate", n.range_rate)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("detection_noise.{name} must be >= 0, got {v}"));
            }
        }
        if self.objects.len() > MAX_OBJECTS {
            return bad(format!("at most {MAX_OBJECTS} objects, got {}", self.objects.len()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.detections_per_cycle > MAX_DETECTIONS_PER_OBJECT {
                return bad(format!(
                    "objects[{i}].detections_per_cycle must be <= {MAX_DETECTIONS_PER_OBJECT}, got {}",
                    o.detections_per_cycle
                ));
            }
            let finite = o.position.iter().chain(&o.velocity).chain(&o.acceleration).all(|v| v.is_finite());
            if !finite {
                return bad(format!("objects[{i}] has non-finite kinematics"));
            }
            if o.shape.iter().any(|v| !(*v >= 0.0)) {
                return bad(format!("objects[{i}].shape must be non-negative"));
            }
        }
        Ok(())
    }

    /// Number of emitted cycles: cycle `k` runs at `k / cycle_rate`, `k` in `0..cycle_count()`.
    pub fn cycle_count(&self) -> u64 {
        (self.duration * self.cycle_rate + 1e-9).floor() as u64
    }

    /// Offset of cycle `k` from the scenario start, rounded to whole nanoseconds.
    pub fn cycle_offset_nanos(&self, cycle: u64) -> u64 {
        (cycle as f64 * 1e9 / self.cycle_rate).round() as u64
    }
}
