use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grasp::{GripperSpec, OracleConfig};
use crate::guided::GuidedConfig;
use crate::mcts::MctsConfig;
use crate::par::Execution;
use crate::prior::{CollectConfig, TrainingConfig};
use crate::scene::WorkspaceSpec;
use crate::sim::{SimConfig, TipSpec};
use crate::tree::PlanEnv;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    /// Maximum pushes per episode.
    pub action_cap: usize,
    pub trials: usize,
    /// Write measured planning time to reports; off keeps reports byte-stable.
    pub record_wall_time: bool,
    pub execution: Execution,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self { action_cap: 8, trials: 5, record_wall_time: false, execution: Execution::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub workspace: WorkspaceSpec,
    pub tip: TipSpec,
    pub sim: SimConfig,
    pub gripper: GripperSpec,
    pub oracle: OracleConfig,
    pub mcts: MctsConfig,
    pub guided: GuidedConfig,
    pub collect: CollectConfig,
    pub training: TrainingConfig,
    pub harness: HarnessConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
}

impl Config {
    pub fn env(&self) -> PlanEnv {
        PlanEnv { tip: self.tip, sim: self.sim, gripper: self.gripper, oracle: self.oracle }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
