//! JSON run configuration. One document can drive `simulate`, `localize`
//! and `track`; unknown keys are rejected.

use serde::{Deserialize, Serialize};
use xsrp::features::GccConfig;
use xsrp::pipeline::{FeatureConfig, PipelineConfig};
use xsrp::synth::NoiseColor;
use xsrp::tracking::TrackerConfig;
use xsrp::{MicArray, Point3};

use crate::error::{usage, CliResult};

fn default_c() -> f64 {
    343.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub mics: Vec<[f64; 3]>,
    pub sample_rate: f64,
    #[serde(default = "default_c")]
    pub speed_of_sound: f64,
}

impl ArrayConfig {
    pub fn build(&self) -> xsrp::Result<MicArray> {
        MicArray::new(self.mics.iter().map(|m| Point3::from(*m)).collect(), self.sample_rate, self.speed_of_sound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Position at t = 0.
    pub position: [f64; 3],
    /// Constant velocity, m/s; moving sources are rendered piecewise.
    #[serde(default)]
    pub velocity: Option<[f64; 3]>,
    #[serde(default = "white")]
    pub signal: NoiseColor,
}

fn white() -> NoiseColor {
    NoiseColor::White
}

fn default_step() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub sources: Vec<SourceConfig>,
    pub duration_s: f64,
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
    /// Samples per position update for moving sources.
    #[serde(default = "default_step")]
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub array: ArrayConfig,
    #[serde(default)]
    pub room: Option<[f64; 3]>,
    #[serde(default)]
    pub scene: Option<SceneConfig>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
}

impl RunConfig {
    pub fn room(&self) -> Option<Point3> {
        self.room.map(Point3::from)
    }

    pub fn require_room(&self) -> CliResult<Point3> {
        self.room().ok_or_else(|| xsrp::Error::Config("this command needs \"room\" dimensions".into()).into())
    }

    /// GCC settings shared by the tracker.
    pub fn gcc(&self, array: &MicArray) -> CliResult<GccConfig> {
        match self.pipeline.features {
            FeatureConfig::GccPhat { beta, gamma, band } => Ok(GccConfig { beta, gamma, band: band.resolve(array)? }),
            FeatureConfig::Cc => Err(usage("tracking needs gcc_phat features")),
        }
    }
}
