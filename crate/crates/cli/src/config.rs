use std::path::{Path, PathBuf};

use ltlseq::envs::EnvConfig;
use ltlseq::executor::ExecutionConfig;
use ltlseq::learn::{Curriculum, ModelConfig, PpoConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::Failure;

pub const SCHEMA: &str = include_str!("../schema/config.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootConfig {
    pub env: EnvConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub execution: ExecutionConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    LetterWorld,
    LetterWorldSmall,
    FlatWorld,
}

/// Overrides on top of a preset; the preset follows the env kind when absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppo: Option<PpoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curriculum: Option<Curriculum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_cap: Option<usize>,
}

impl RootConfig {
    /// Reads `path`, checks it against the schema, then deserialises it.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|f| f.context(&format!("config {}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let value: Value = serde_json::from_str(text).map_err(|e| Failure::Usage(format!("invalid JSON: {e}")))?;
        validate(&value)?;
        let cfg: RootConfig = serde_json::from_value(value).map_err(|e| Failure::Usage(e.to_string()))?;
        cfg.execution.check()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        let preset = self.train.preset.unwrap_or(match self.env {
            EnvConfig::LetterWorld(_) => Preset::LetterWorld,
            EnvConfig::FlatWorld(_) => Preset::FlatWorld,
        });
        let mut cfg = match preset {
            Preset::LetterWorld => TrainConfig::letter_world(),
            Preset::LetterWorldSmall => TrainConfig::letter_world_small(),
            Preset::FlatWorld => TrainConfig::flat_world(),
        };
        cfg.env = self.env.clone();
        let t = &self.train;
        if let Some(m) = &t.model {
            cfg.model = m.clone();
        }
        if let Some(p) = &t.ppo {
            cfg.ppo = p.clone();
        }
        if let Some(c) = &t.curriculum {
            cfg.curriculum = c.clone();
        }
        if let Some(n) = t.total_steps {
            cfg.total_steps = n;
        }
        if t.episode_cap.is_some() {
            cfg.episode_cap = t.episode_cap;
        }
        cfg.seed = self.seed;
        cfg
    }
}

pub fn validate(value: &Value) -> Result<(), Failure> {
    let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{}: {}", e.instance_path, e)).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("schema violation: {}", errors.join("; "))))
    }
}
