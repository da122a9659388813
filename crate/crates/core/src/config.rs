//! Pipeline configuration read from a TOML file and overridden from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetKind;
use crate::decoder::DecodeStage;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Oracle,
    Remote,
}

impl std::str::FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(GeneratorKind::Oracle),
            "remote" => Ok(GeneratorKind::Remote),
            other => Err(format!("unknown generator `{}` (expected oracle or remote)", other)),
        }
    }
}

/// Settings handed through to the external trainer untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// One learning rate per training stage, in curriculum order.
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub gradient_accumulation: usize,
    pub max_sequence_length: usize,
    pub model: String,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            learning_rates: vec![1e-4, 5e-5, 3e-5, 2e-5],
            batch_sizes: vec![16, 16, 16, 16],
            gradient_accumulation: 1,
            max_sequence_length: 512,
            model: "facebook/bart-base".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_kind: DatasetKind,
    /// Annotation file read by `ingest`.
    pub input: Option<PathBuf>,
    pub coref: Option<PathBuf>,
    /// Directory of `<doc_id>.amr` files.
    pub penman_dir: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub max_sentences: usize,
    pub alpha: f64,
    pub stages: Vec<DecodeStage>,
    pub generator: GeneratorKind,
    pub endpoint: Option<String>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub trainer: TrainerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset_kind: DatasetKind::Rams,
            input: None,
            coref: None,
            penman_dir: None,
            templates: None,
            max_sentences: 9,
            alpha: 0.7,
            stages: DecodeStage::ALL.to_vec(),
            generator: GeneratorKind::Oracle,
            endpoint: None,
            output_dir: PathBuf::from("cup-out"),
            seed: 42,
            trainer: TrainerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ConfigError::Invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.max_sentences == 0 {
            return Err(ConfigError::Invalid("max_sentences must be at least 1".to_string()));
        }
        if self.stages.is_empty() {
            return Err(ConfigError::Invalid("at least one decoding stage is required".to_string()));
        }
        if self.trainer.learning_rates.len() != 4 || self.trainer.batch_sizes.len() != 4 {
            return Err(ConfigError::Invalid(
                "trainer needs one learning rate and batch size per stage (4)".to_string(),
            ));
        }
        Ok(())
    }
}
