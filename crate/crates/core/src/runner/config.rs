use super::{RunnerError, DEFAULT_SEEDS, RESULTS_FILE};
use crate::corpus::{generate_synthetic, SyntheticSpec, TaggedCorpus};
use crate::schedule::{DEFAULT_MAX_LR, DEFAULT_PATIENCE, DEFAULT_WARMUP_EPOCHS};
use crate::toytrainer::{OptimizerConfig, DEFAULT_MAX_SEQUENCE_LENGTH};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Experiment configuration, read from TOML. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub results_dir: PathBuf,
    /// Hard cap on the epochs of one run.
    pub max_epochs: u32,
    /// Seed of the corpus subsampling, shared by all runs.
    pub sample_seed: u64,
    pub record_traces: bool,
    /// Wall-clock times make the results file non-reproducible byte for byte.
    pub record_timing: bool,
    pub threads: Option<usize>,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleDefaults,
    pub grid: GridConfig,
    pub corpus: BTreeMap<String, CorpusSource>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            results_dir: PathBuf::from("results"),
            max_epochs: 500,
            sample_seed: 0,
            record_traces: true,
            record_timing: false,
            threads: None,
            model: ModelConfig::default(),
            optimizer: OptimizerConfig::default(),
            schedule: ScheduleDefaults::default(),
            grid: GridConfig::default(),
            corpus: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Results file, honouring `ADAFT_RESULTS_DIR`.
    pub fn results_path(&self, base: &Path) -> PathBuf {
        let dir = std::env::var_os("ADAFT_RESULTS_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| base.join(&self.results_dir));
        dir.join(RESULTS_FILE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub max_sequence_length: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            max_sequence_length: DEFAULT_MAX_SEQUENCE_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleDefaults {
    pub max_lr: f64,
    pub warmup_epochs: u32,
    pub patience: u32,
    pub original_epochs: u32,
    pub stable_epochs: u32,
}

impl Default for ScheduleDefaults {
    fn default() -> Self {
        Self {
            max_lr: DEFAULT_MAX_LR,
            warmup_epochs: DEFAULT_WARMUP_EPOCHS,
            patience: DEFAULT_PATIENCE,
            original_epochs: 5,
            stable_epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub approaches: Vec<String>,
    pub corpora: Vec<String>,
    pub x: Vec<f64>,
    /// Fixed validation scaling factor; defaults to the training factor.
    pub x_val: Option<f64>,
    pub seeds: Vec<u64>,
    pub merge_train_val: bool,
    pub pinned_epochs: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            approaches: vec!["original".into(), "stable".into(), "adaptive".into()],
            corpora: Vec::new(),
            x: vec![0.005, 0.01, 0.015, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
            x_val: None,
            seeds: DEFAULT_SEEDS.to_vec(),
            merge_train_val: false,
            pinned_epochs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    Synthetic {
        num_sentences: usize,
        entity_types: Vec<String>,
        #[serde(default)]
        noise_rate: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Directory with train/val/test BIO files.
    Bio { path: PathBuf },
}

impl CorpusSource {
    pub fn load(&self, id: &str, base: &Path) -> Result<TaggedCorpus, RunnerError> {
        Ok(match self {
            CorpusSource::Synthetic {
                num_sentences,
                entity_types,
                noise_rate,
                seed,
            } => {
                let types: Vec<&str> = entity_types.iter().map(String::as_str).collect();
                generate_synthetic(&SyntheticSpec::new(*num_sentences, &types, *noise_rate, *seed))?
            }
            CorpusSource::Bio { path } => TaggedCorpus::load_dir(id, &base.join(path))?,
        })
    }
}
