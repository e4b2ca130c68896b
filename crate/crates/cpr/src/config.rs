//! Run configuration: TOML file, then command-line overrides, on top of
//! built-in defaults.
//!
//! ```toml
//! seeds = [0, 1, 2]
//! out = "runs/lastfm"
//!
//! [data]
//! path = "data/lastfm.tsv"
//! min_attribute_freq = 10
//!
//! [fm]
//! epochs = 20
//!
//! [eval]
//! policies = ["scpr", "max-entropy", "abs-greedy"]
//! reference = "abs-greedy"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use cpr_core::data::{SyntheticSpec, DEFAULT_SPLIT_RATIOS};
use cpr_core::engine::{DEFAULT_MAX_TURNS, DEFAULT_TOP_K};
use cpr_core::{DqnConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub k: usize,
    pub max_turns: u32,
    pub out: PathBuf,
    pub data: DataConfig,
    pub fm: TrainConfig,
    pub dqn: DqnConfig,
    pub training: PolicyTraining,
    pub eval: EvalConfig,
    pub serve: ServeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            k: DEFAULT_TOP_K,
            max_turns: DEFAULT_MAX_TURNS,
            out: PathBuf::from("runs"),
            data: DataConfig::default(),
            fm: TrainConfig::default(),
            dqn: DqnConfig::default(),
            training: PolicyTraining::default(),
            eval: EvalConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Edge-list dataset.
    pub path: Option<PathBuf>,
    /// Synthetic generator settings, used when no dataset path is given.
    pub synthetic: Option<SyntheticSpec>,
    pub min_attribute_freq: usize,
    pub split: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { path: None, synthetic: None, min_attribute_freq: 1, split: DEFAULT_SPLIT_RATIOS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyTraining {
    pub episodes: usize,
}

impl Default for PolicyTraining {
    fn default() -> Self {
        Self { episodes: 2000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Policy names (`scpr`, `max-entropy`, `abs-greedy`) or paths to
    /// policy checkpoints.
    pub policies: Vec<String>,
    /// Policy that relative success rates are measured against.
    pub reference: Option<String>,
    pub reports: Vec<ReportFormat>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            policies: vec!["scpr".into(), "max-entropy".into(), "abs-greedy".into()],
            reference: None,
            reports: vec![ReportFormat::Csv, ReportFormat::Json],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    pub idle_timeout_secs: u64,
    /// Optional `kind:index<TAB>name` sidecar.
    pub names: Option<PathBuf>,
    pub policy: String,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self { addr: "127.0.0.1:8080".into(), idle_timeout_secs: 30 * 60, names: None, policy: "scpr".into() }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).at(path)?, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.max_turns == 0 {
            return Err(Error::Config("k and max_turns must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.data.min_attribute_freq == 0 {
            return Err(Error::Config("min_attribute_freq must be at least 1".into()));
        }
        self.fm.validate()?;
        self.dqn.validate()?;
        Ok(())
    }

    /// Artifact directory of one seed.
    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.out.join(format!("seed-{seed}"))
    }
}

pub fn load_synthetic_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = fs::read_to_string(path).at(path)?;
    toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
