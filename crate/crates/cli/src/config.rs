//! The versioned TOML run configuration shared by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use placegan::data::{StationaryRuns, CANNY_HIGH, CANNY_LOW};
use placegan::features::StackNormalization;
use placegan::placerec::{DEFAULT_THRESHOLD_POINTS, DEFAULT_TOLERANCE};
use placegan::{DiscriminatorConfig, GeneratorConfig, TrainingConfig};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// Which generator translates the queries and whose discriminator embeds them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// A queries through G_B, matched in D_B against a B database.
    AToB,
    /// B queries through G_A, matched in D_A against an A database.
    BToA,
    /// B queries matched untranslated in D_A against an A database.
    A,
    /// A queries matched untranslated in D_B against a B database.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub seed: u64,
    /// Frames per domain.
    pub count: usize,
    /// Square image side in pixels.
    pub size: usize,
    /// Camera advance per frame in world units.
    pub speed: f64,
    /// Hold the camera for `stationary_length` frames after every
    /// `stationary_every` moving frames; 0 disables.
    pub stationary_every: usize,
    pub stationary_length: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { seed: 0, count: 2000, size: 64, speed: 7.0, stationary_every: 0, stationary_length: 0 }
    }
}

impl SynthSection {
    pub fn stationary(&self) -> Option<StationaryRuns> {
        (self.stationary_every > 0 && self.stationary_length > 0)
            .then_some(StationaryRuns { every: self.stationary_every, length: self.stationary_length })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Time-ordered frames of domain A and B.
    pub dir_a: PathBuf,
    pub dir_b: PathBuf,
    /// Keep every `stride`-th frame.
    pub stride: usize,
    /// Fraction of each training quarter actually used.
    pub train_fraction: f64,
    /// Replace domain B by its Canny edge map.
    pub b_as_edges: bool,
    pub canny_low: f64,
    pub canny_high: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dir_a: PathBuf::from("data/A"),
            dir_b: PathBuf::from("data/B"),
            stride: 1,
            train_fraction: 1.0,
            b_as_edges: false,
            canny_low: CANNY_LOW,
            canny_high: CANNY_HIGH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub direction: Direction,
    /// Sequence lengths to sweep.
    pub lengths: Vec<usize>,
    /// Evenly spaced distance thresholds on [0, 2].
    pub threshold_points: usize,
    /// Matches this close to the true frame count as correct.
    pub tolerance_frames: usize,
    pub normalization: StackNormalization,
    /// Distances at or above this are white in the heatmap.
    pub heatmap_clip: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            direction: Direction::BToA,
            lengths: vec![1, 2, 5, 10],
            threshold_points: DEFAULT_THRESHOLD_POINTS,
            tolerance_frames: DEFAULT_TOLERANCE,
            normalization: StackNormalization::PerFrame,
            heatmap_clip: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub discriminator: DiscriminatorConfig,
    #[serde(default)]
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            synth: SynthSection::default(),
            data: DataSection::default(),
            training: TrainingConfig::default(),
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("invalid config")?;
        if config.version != CONFIG_VERSION {
            bail!("unsupported config version {} (expected {CONFIG_VERSION})", config.version);
        }
        Ok(config)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }
}
