//! Run configuration for the `train` command: a JSON file plus flat dotted
//! overrides such as `--train.group_size=16`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::grpo::TrainConfig;
use crate::reward::RewardConfig;
use crate::synthenv::EnvSpec;
use crate::windowing::GridConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("malformed override `{0}` (expected --section.key=value)")]
    MalformedOverride(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
}

/// Which synthetic suite to train on when no dataset directory is given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub count: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, count: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Suite directory written by `gen-data`; generated in memory when unset.
    pub dataset: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Checkpoint to resume from.
    pub checkpoint: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: None,
            output_dir: PathBuf::from("runs/default"),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    pub env: EnvSpec,
    pub suite: SuiteConfig,
    pub paths: Paths,
    /// Write a numbered checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            reward: RewardConfig::default(),
            train: TrainConfig::default(),
            env: EnvSpec::default(),
            suite: SuiteConfig::default(),
            paths: Paths::default(),
            checkpoint_every: 50,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Set `key` (dotted path) to `raw`, parsed as JSON when possible and as a
    /// bare string otherwise.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut tree;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        }
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        *self = serde_json::from_value(tree).map_err(|e| ConfigError::InvalidValue {
            key: key.to_string(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    /// Apply `--a.b=value` style arguments in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, args: &[S]) -> Result<(), ConfigError> {
        for arg in args {
            let arg = arg.as_ref();
            let body = arg
                .strip_prefix("--")
                .ok_or_else(|| ConfigError::MalformedOverride(arg.to_string()))?;
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::MalformedOverride(arg.to_string()))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Digest of every setting that shapes the optimization trajectory.
    /// Iteration count, paths and checkpoint cadence are excluded so a run
    /// can be extended or relocated and still resume.
    pub fn digest(&self) -> String {
        let mut train = self.train.clone();
        train.iterations = 0;
        let canonical = serde_json::json!({
            "grid": self.grid,
            "reward": self.reward,
            "train": train,
            "env": self.env,
            "suite": self.suite,
            "dataset": self.paths.dataset,
        });
        let bytes = serde_json::to_vec(&canonical).expect("digest input serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
