//! Experiment orchestration: approaches, configuration, seeded runs,
//! resumable sweeps persisted as JSON lines, and report tables.

mod config;
pub mod report;

pub use config::{CorpusSource, ExperimentConfig, GridConfig, ModelConfig, ScheduleDefaults};

use crate::corpus::{self, CorpusError, ScalingSpec, TaggedCorpus};
use crate::schedule::{CooldownShape, DecayShape, ScheduleConfig, DEFAULT_PATIENCE};
use crate::toytrainer::{self, Encoder, TaggerModel, TrainError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEEDS: [u64; 5] = [43, 44, 45, 46, 47];
pub const RESULTS_FILE: &str = "results.jsonl";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("unknown approach {0:?}")]
    UnknownApproach(String),
    #[error("corpus {0:?} is not registered")]
    MissingCorpus(String),
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("{path}:{line}: corrupt result record: {message}")]
    CorruptResults { path: PathBuf, line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fine-tuning approach, including the schedule variants and ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approach {
    /// 5 epochs, linear decay.
    Original,
    /// 20 epochs, linear decay.
    Stable,
    /// Early stopping with patience 7, linear cool-down and resumption.
    Adaptive,
    /// Adaptive with a different patience.
    Patience(u32),
    NoResumption,
    /// Adaptive with the learning rate held constant during cool-down.
    ConstantCooldown(u32),
    /// 20 epochs with the adaptive (hybrid) decay shape.
    Fixed20Hybrid,
    /// Pinned epoch count with linear decay.
    AdaptiveLinear,
    /// Pinned epoch count with the hybrid decay shape.
    AdaptiveHybrid,
}

impl Approach {
    pub fn needs_pinned_epochs(self) -> bool {
        matches!(self, Approach::AdaptiveLinear | Approach::AdaptiveHybrid)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            Approach::Adaptive | Approach::Patience(_) | Approach::NoResumption | Approach::ConstantCooldown(_)
        )
    }

    /// Schedule for this approach. `pinned_epochs` is rounded to the nearest integer.
    pub fn schedule(self, defaults: &ScheduleDefaults, pinned_epochs: Option<f64>) -> Result<ScheduleConfig, RunnerError> {
        let p = defaults.patience;
        let pinned = || {
            pinned_epochs
                .map(|n| n.round() as u32)
                .ok_or_else(|| RunnerError::InvalidSpec(format!("approach {self} needs pinned_epochs")))
        };
        let cfg = match self {
            Approach::Original => ScheduleConfig::fixed(defaults.original_epochs, DecayShape::Linear),
            Approach::Stable => ScheduleConfig::fixed(defaults.stable_epochs, DecayShape::Linear),
            Approach::Adaptive => ScheduleConfig::adaptive_with(p, CooldownShape::Linear, true),
            Approach::Patience(n) => ScheduleConfig::adaptive_with(n, CooldownShape::Linear, true),
            Approach::NoResumption => ScheduleConfig::adaptive_with(p, CooldownShape::Linear, false),
            Approach::ConstantCooldown(n) => ScheduleConfig::adaptive_with(n, CooldownShape::Constant, true),
            Approach::Fixed20Hybrid => ScheduleConfig::fixed(20, DecayShape::Hybrid { patience: p }),
            Approach::AdaptiveLinear => ScheduleConfig::fixed(pinned()?, DecayShape::Linear),
            Approach::AdaptiveHybrid => ScheduleConfig::fixed(pinned()?, DecayShape::Hybrid { patience: p }),
        }
        .with_max_lr(defaults.max_lr)
        .with_warmup(defaults.warmup_epochs);
        cfg.validate()
            .map_err(|e| RunnerError::InvalidSpec(format!("{self}: {e}")))?;
        Ok(cfg)
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Approach::Original => f.write_str("original"),
            Approach::Stable => f.write_str("stable"),
            Approach::Adaptive => f.write_str("adaptive"),
            Approach::Patience(n) => write!(f, "patience-{n}"),
            Approach::NoResumption => f.write_str("no-resumption"),
            Approach::ConstantCooldown(n) if *n == DEFAULT_PATIENCE => f.write_str("constant-cooldown"),
            Approach::ConstantCooldown(n) => write!(f, "constant-cooldown-{n}"),
            Approach::Fixed20Hybrid => f.write_str("fixed20-hybrid"),
            Approach::AdaptiveLinear => f.write_str("adaptive-linear"),
            Approach::AdaptiveHybrid => f.write_str("adaptive-hybrid"),
        }
    }
}

impl FromStr for Approach {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || RunnerError::UnknownApproach(s.to_string());
        let number = |rest: &str| rest.parse::<u32>().map_err(|_| unknown());
        Ok(match s {
            "original" => Approach::Original,
            "stable" => Approach::Stable,
            "adaptive" => Approach::Adaptive,
            "no-resumption" => Approach::NoResumption,
            "constant-cooldown" => Approach::ConstantCooldown(DEFAULT_PATIENCE),
            "fixed20-hybrid" => Approach::Fixed20Hybrid,
            "adaptive-linear" => Approach::AdaptiveLinear,
            "adaptive-hybrid" => Approach::AdaptiveHybrid,
            _ => {
                if let Some(rest) = s.strip_prefix("patience-") {
                    Approach::Patience(number(rest)?)
                } else if let Some(rest) = s.strip_prefix("constant-cooldown-") {
                    Approach::ConstantCooldown(number(rest)?)
                } else {
                    return Err(unknown());
                }
            }
        })
    }
}

impl Serialize for Approach {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Approach {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One experiment: an approach on a scaled corpus, repeated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub approach: Approach,
    pub corpus_id: String,
    pub x_train: f64,
    pub x_val: f64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub merge_train_val: bool,
    #[serde(default)]
    pub pinned_epochs: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(approach: Approach, corpus_id: impl Into<String>, x: f64) -> Self {
        Self {
            approach,
            corpus_id: corpus_id.into(),
            x_train: x,
            x_val: x,
            seeds: DEFAULT_SEEDS.to_vec(),
            merge_train_val: false,
            pinned_epochs: None,
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: String| Err(RunnerError::InvalidSpec(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        for x in [self.x_train, self.x_val] {
            if !(x > 0.0 && x <= 1.0) {
                return bad(format!("scaling factor {x} outside (0, 1]"));
            }
        }
        if self.pinned_epochs.is_some() && !(self.merge_train_val || self.approach.needs_pinned_epochs()) {
            return bad("pinned_epochs requires merge_train_val or a pinned ablation".into());
        }
        if self.merge_train_val && self.pinned_epochs.is_none() {
            return bad("merge_train_val requires pinned_epochs".into());
        }
        if let Some(n) = self.pinned_epochs {
            if !(n >= 1.0) {
                return bad(format!("pinned_epochs must be at least 1, got {n}"));
            }
        }
        Ok(())
    }

    /// Schedule of the runs. Train+val retraining uses the hybrid decay over
    /// the pinned epoch count without validation monitoring.
    pub fn schedule(&self, defaults: &ScheduleDefaults) -> Result<ScheduleConfig, RunnerError> {
        if self.merge_train_val {
            return Approach::AdaptiveHybrid.schedule(defaults, self.pinned_epochs);
        }
        self.approach.schedule(defaults, self.pinned_epochs)
    }

    fn key(&self, seed: u64) -> RunKey {
        RunKey {
            approach: self.approach,
            corpus_id: self.corpus_id.clone(),
            x_train: self.x_train.to_bits(),
            x_val: self.x_val.to_bits(),
            merge_train_val: self.merge_train_val,
            pinned_epochs: self.pinned_epochs.map(f64::to_bits),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RunKey {
    approach: Approach,
    corpus_id: String,
    x_train: u64,
    x_val: u64,
    merge_train_val: bool,
    pinned_epochs: Option<u64>,
    seed: u64,
}

/// One seeded training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub approach: Approach,
    pub corpus_id: String,
    pub x_train: f64,
    pub x_val: f64,
    pub merge_train_val: bool,
    pub pinned_epochs: Option<f64>,
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub epochs_run: f64,
    /// Zero for runs that hit the epoch cap or diverged numerically.
    pub test_f1: f64,
    pub converged: bool,
    #[serde(default)]
    pub capped: bool,
    #[serde(default)]
    pub diverged: bool,
    #[serde(default)]
    pub per_epoch_val_loss: Vec<Option<f64>>,
    #[serde(default)]
    pub per_epoch_lr: Vec<f64>,
    #[serde(default)]
    pub wall_time: Option<f64>,
}

impl RunResult {
    fn key(&self) -> RunKey {
        RunKey {
            approach: self.approach,
            corpus_id: self.corpus_id.clone(),
            x_train: self.x_train.to_bits(),
            x_val: self.x_val.to_bits(),
            merge_train_val: self.merge_train_val,
            pinned_epochs: self.pinned_epochs.map(f64::to_bits),
            seed: self.seed,
        }
    }
}

/// Loaded corpora by id.
#[derive(Debug, Clone, Default)]
pub struct CorpusRegistry {
    corpora: BTreeMap<String, TaggedCorpus>,
}

impl CorpusRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, corpus: TaggedCorpus) {
        self.corpora.insert(id.into(), corpus);
    }

    pub fn get(&self, id: &str) -> Result<&TaggedCorpus, RunnerError> {
        self.corpora
            .get(id)
            .ok_or_else(|| RunnerError::MissingCorpus(id.to_string()))
    }

    /// Generates or loads every corpus of `config`; relative paths resolve against `base`.
    pub fn from_config(config: &ExperimentConfig, base: &Path) -> Result<Self, RunnerError> {
        let mut reg = Self::new();
        for (id, source) in &config.corpus {
            reg.insert(id.clone(), source.load(id, base)?);
        }
        Ok(reg)
    }
}

/// Everything a run needs besides its spec.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: ExperimentConfig,
    pub corpora: CorpusRegistry,
}

impl RunContext {
    pub fn new(config: ExperimentConfig, corpora: CorpusRegistry) -> Self {
        Self { config, corpora }
    }

    pub fn run_one(&self, spec: &ExperimentSpec, seed: u64) -> Result<RunResult, RunnerError> {
        spec.validate()?;
        let cfg = &self.config;
        let schedule = spec.schedule(&cfg.schedule)?;
        let source = self.corpora.get(&spec.corpus_id)?;
        let mut data = corpus::scale(source, ScalingSpec::new(spec.x_train, spec.x_val), cfg.sample_seed)?;
        if spec.merge_train_val {
            data = corpus::merge_train_val(&data);
        }
        let started = Instant::now();
        let encoder = Encoder::for_corpus(&data);
        let train = encoder.encode(&data.train)?;
        let val = encoder.encode(&data.val)?;
        let test = encoder.encode(&data.test)?;
        let model = TaggerModel::random(encoder.vocab.len(), cfg.model.embed_dim, encoder.tagset.len(), seed)
            .with_max_sequence_length(cfg.model.max_sequence_length);
        // Validation is still recorded for fixed schedules, but merged runs have none.
        let outcome = toytrainer::train(
            model,
            &train,
            &val,
            &schedule,
            &cfg.optimizer,
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED,
            cfg.max_epochs,
        )?;
        let failed = outcome.capped || outcome.diverged;
        let test_f1 = if failed {
            0.0
        } else {
            outcome.model.evaluate(&test, &encoder.tagset)?.f1()
        };
        let (per_epoch_val_loss, per_epoch_lr) = if cfg.record_traces {
            (outcome.per_epoch_val_loss, outcome.per_epoch_lr)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(RunResult {
            schema_version: SCHEMA_VERSION,
            approach: spec.approach,
            corpus_id: spec.corpus_id.clone(),
            x_train: spec.x_train,
            x_val: spec.x_val,
            merge_train_val: spec.merge_train_val,
            pinned_epochs: spec.pinned_epochs,
            seed,
            n_train: data.train.len(),
            n_val: data.val.len(),
            epochs_run: f64::from(outcome.epochs_run),
            test_f1,
            converged: test_f1 > 0.0,
            capped: outcome.capped,
            diverged: outcome.diverged,
            per_epoch_val_loss,
            per_epoch_lr,
            wall_time: cfg.record_timing.then(|| started.elapsed().as_secs_f64()),
        })
    }
}

/// Runs every seed of `spec` sequentially.
pub fn run_experiment(spec: &ExperimentSpec, ctx: &RunContext) -> Result<Vec<RunResult>, RunnerError> {
    spec.validate()?;
    spec.seeds.iter().map(|&s| ctx.run_one(spec, s)).collect()
}

/// Expands a grid into experiment specs in approach, corpus, x order.
pub fn expand_grid(grid: &GridConfig) -> Result<Vec<ExperimentSpec>, RunnerError> {
    let approaches: Vec<Approach> = grid
        .approaches
        .iter()
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let mut specs = Vec::new();
    for &approach in &approaches {
        for corpus_id in &grid.corpora {
            for &x in &grid.x {
                specs.push(ExperimentSpec {
                    approach,
                    corpus_id: corpus_id.clone(),
                    x_train: x,
                    x_val: grid.x_val.unwrap_or(x),
                    seeds: grid.seeds.clone(),
                    merge_train_val: grid.merge_train_val,
                    pinned_epochs: grid.pinned_epochs,
                });
            }
        }
    }
    if specs.is_empty() || grid.seeds.is_empty() {
        return Err(RunnerError::EmptyGrid);
    }
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

pub fn read_results(path: &Path) -> Result<Vec<RunResult>, RunnerError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |message: String| RunnerError::CorruptResults {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let r: RunResult = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(corrupt(format!("unsupported schema version {}", r.schema_version)));
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepSummary {
    pub total: usize,
    pub skipped: usize,
    pub computed: usize,
}

/// Runs every missing `(spec, seed)` pair and appends the results to
/// `results_path` in grid order. Runs execute on `threads` workers; a single
/// writer serializes the output.
pub fn sweep(
    specs: &[ExperimentSpec],
    ctx: &RunContext,
    results_path: &Path,
    threads: usize,
) -> Result<SweepSummary, RunnerError> {
    if specs.is_empty() {
        return Err(RunnerError::EmptyGrid);
    }
    let done: HashSet<RunKey> = read_results(results_path)?.iter().map(RunResult::key).collect();
    let all: Vec<(&ExperimentSpec, u64)> = specs
        .iter()
        .flat_map(|s| s.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let todo: Vec<(&ExperimentSpec, u64)> = all
        .iter()
        .copied()
        .filter(|(s, seed)| !done.contains(&s.key(*seed)))
        .collect();
    let summary = SweepSummary {
        total: all.len(),
        skipped: all.len() - todo.len(),
        computed: todo.len(),
    };
    if todo.is_empty() {
        return Ok(summary);
    }
    if let Some(dir) = results_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut file = OpenOptions::new().create(true).append(true).open(results_path)?;
    let threads = threads.clamp(1, todo.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<RunResult, RunnerError>)>();

    std::thread::scope(|scope| -> Result<(), RunnerError> {
        for _ in 0..threads {
            let tx = tx.clone();
            let (next, todo) = (&next, &todo);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(spec, seed)) = todo.get(i) else { break };
                if tx.send((i, ctx.run_one(spec, seed))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending: BTreeMap<usize, RunResult> = BTreeMap::new();
        let mut written = 0;
        for (i, result) in rx.iter() {
            let result = match result {
                Ok(r) => r,
                Err(e) => {
                    next.store(todo.len(), Ordering::Relaxed);
                    return Err(e);
                }
            };
            pending.insert(i, result);
            while let Some(r) = pending.remove(&written) {
                let line = serde_json::to_string(&r).expect("results serialize");
                writeln!(file, "{line}")?;
                file.flush()?;
                written += 1;
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

/// Worker count from `ADAFT_THREADS`, falling back to the available parallelism.
pub fn default_threads() -> usize {
    std::env::var("ADAFT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
