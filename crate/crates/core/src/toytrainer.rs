//! A small sequence tagger trained with Adam under a [`ScheduleConfig`].
//!
//! Each token is classified from the concatenated embeddings of itself and
//! its two neighbours through a single linear-softmax layer. Sentence
//! boundaries use the padding embedding.

use crate::corpus::{Sentence, TaggedCorpus};
use crate::nermetrics::{self, EvalReport};
use crate::schedule::{ScheduleConfig, ScheduleError, ScheduleState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const DEFAULT_MAX_SEQUENCE_LENGTH: usize = 128;
const WINDOW: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("tag id {id} out of range for {num_tags} tags")]
    TagOutOfRange { id: usize, num_tags: usize },
    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("sentence has {tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("parameter shapes differ: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("adaptive schedules need a non-empty validation split")]
    MissingValidation,
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidOptimizer(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Token-to-id map built from a training split. Ids 0 and 1 are reserved
/// for padding and unknown tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    ids: HashMap<String, usize>,
    len: usize,
}

impl Vocabulary {
    pub fn build(sentences: &[Sentence]) -> Self {
        let mut ids = HashMap::new();
        let mut next = 2;
        for token in sentences.iter().flat_map(|s| &s.tokens) {
            ids.entry(token.clone()).or_insert_with(|| {
                next += 1;
                next - 1
            });
        }
        Self { ids, len: next }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK)
    }
}

/// `O` followed by `B-X`, `I-X` for every entity type in vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct TagSet {
    tags: Vec<String>,
}

impl TagSet {
    pub fn new<S: AsRef<str>>(entity_types: &[S]) -> Self {
        let mut tags = vec!["O".to_string()];
        for t in entity_types {
            tags.push(format!("B-{}", t.as_ref()));
            tags.push(format!("I-{}", t.as_ref()));
        }
        Self { tags }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, tag: &str) -> Result<usize, TrainError> {
        self.tags
            .iter()
            .position(|t| t == tag)
            .ok_or_else(|| TrainError::UnknownTag(tag.to_string()))
    }

    pub fn name(&self, id: usize) -> &str {
        &self.tags[id]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub ids: Vec<usize>,
    pub tags: Vec<usize>,
}

/// Vocabulary and tag set of one corpus, used to encode its splits.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub vocab: Vocabulary,
    pub tagset: TagSet,
}

impl Encoder {
    pub fn for_corpus(corpus: &TaggedCorpus) -> Self {
        Self {
            vocab: Vocabulary::build(&corpus.train),
            tagset: TagSet::new(&corpus.tag_vocabulary),
        }
    }

    pub fn encode(&self, sentences: &[Sentence]) -> Result<Vec<EncodedSentence>, TrainError> {
        sentences
            .iter()
            .map(|s| {
                Ok(EncodedSentence {
                    ids: s.tokens.iter().map(|t| self.vocab.id(t)).collect(),
                    tags: s.tags.iter().map(|t| self.tagset.id(t)).collect::<Result<_, _>>()?,
                })
            })
            .collect()
    }
}

/// Flat parameter vector: embedding table (`vocab_size x embed_dim`), then
/// window weights (`num_tags x 3 embed_dim`), then bias (`num_tags`).
/// Gradients and optimizer moments share the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub num_tags: usize,
    pub max_sequence_length: usize,
    pub params: Parameters,
}

impl TaggerModel {
    pub fn parameter_count(vocab_size: usize, embed_dim: usize, num_tags: usize) -> usize {
        vocab_size * embed_dim + num_tags * WINDOW * embed_dim + num_tags
    }

    pub fn zeros(vocab_size: usize, embed_dim: usize, num_tags: usize) -> Self {
        Self {
            vocab_size,
            embed_dim,
            num_tags,
            max_sequence_length: DEFAULT_MAX_SEQUENCE_LENGTH,
            params: Parameters {
                values: vec![0.0; Self::parameter_count(vocab_size, embed_dim, num_tags)],
            },
        }
    }

    /// Uniform initialization in `[-0.1, 0.1]`.
    pub fn random(vocab_size: usize, embed_dim: usize, num_tags: usize, seed: u64) -> Self {
        let mut model = Self::zeros(vocab_size, embed_dim, num_tags);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut model.params.values {
            *v = rng.gen_range(-0.1..=0.1);
        }
        model
    }

    pub fn with_max_sequence_length(mut self, len: usize) -> Self {
        self.max_sequence_length = len;
        self
    }

    fn weights_offset(&self) -> usize {
        self.vocab_size * self.embed_dim
    }

    fn bias_offset(&self) -> usize {
        self.weights_offset() + self.num_tags * WINDOW * self.embed_dim
    }

    fn window_ids(ids: &[usize], i: usize) -> [usize; WINDOW] {
        let prev = if i == 0 { PAD } else { ids[i - 1] };
        let next = ids.get(i + 1).copied().unwrap_or(PAD);
        [prev, ids[i], next]
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), TrainError> {
        match ids.iter().find(|&&id| id >= self.vocab_size) {
            Some(&id) => Err(TrainError::TokenOutOfRange {
                id,
                vocab_size: self.vocab_size,
            }),
            None => Ok(()),
        }
    }

    fn logits_into(&self, window: &[usize; WINDOW], out: &mut [f64]) {
        let d = self.embed_dim;
        let p = &self.params.values;
        let w0 = self.weights_offset();
        let b0 = self.bias_offset();
        for (k, o) in out.iter_mut().enumerate() {
            let row = &p[w0 + k * WINDOW * d..w0 + (k + 1) * WINDOW * d];
            let mut z = p[b0 + k];
            for (slot, &id) in window.iter().enumerate() {
                let e = &p[id * d..(id + 1) * d];
                let w = &row[slot * d..(slot + 1) * d];
                z += w.iter().zip(e).map(|(a, b)| a * b).sum::<f64>();
            }
            *o = z;
        }
    }

    /// Per-token tag distributions; input beyond `max_sequence_length` is dropped.
    pub fn forward(&self, ids: &[usize]) -> Result<Vec<Vec<f64>>, TrainError> {
        let ids = &ids[..ids.len().min(self.max_sequence_length)];
        self.check_ids(ids)?;
        Ok((0..ids.len())
            .map(|i| {
                let mut row = vec![0.0; self.num_tags];
                self.logits_into(&Self::window_ids(ids, i), &mut row);
                softmax_in_place(&mut row);
                row
            })
            .collect())
    }

    /// Token-mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_gradients(&self, batch: &[&EncodedSentence]) -> Result<(f64, Parameters), TrainError> {
        let mut grad = Parameters {
            values: vec![0.0; self.params.values.len()],
        };
        let loss = self.accumulate(batch, Some(&mut grad))?;
        Ok((loss, grad))
    }

    /// Token-mean cross-entropy without gradients.
    pub fn loss(&self, sentences: &[EncodedSentence]) -> Result<f64, TrainError> {
        let refs: Vec<&EncodedSentence> = sentences.iter().collect();
        self.accumulate(&refs, None)
    }

    fn accumulate(&self, batch: &[&EncodedSentence], mut grad: Option<&mut Parameters>) -> Result<f64, TrainError> {
        if batch.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        let d = self.embed_dim;
        let t = self.num_tags;
        let w0 = self.weights_offset();
        let b0 = self.bias_offset();
        let mut tokens = 0usize;
        for s in batch {
            if s.ids.len() != s.tags.len() {
                return Err(TrainError::LengthMismatch {
                    tokens: s.ids.len(),
                    tags: s.tags.len(),
                });
            }
            let n = s.ids.len().min(self.max_sequence_length);
            self.check_ids(&s.ids[..n])?;
            if let Some(&id) = s.tags[..n].iter().find(|&&y| y >= t) {
                return Err(TrainError::TagOutOfRange { id, num_tags: t });
            }
            tokens += n;
        }
        if tokens == 0 {
            return Ok(0.0);
        }
        let scale = 1.0 / tokens as f64;
        let p = &self.params.values;
        let mut total = 0.0;
        let mut probs = vec![0.0; t];
        for s in batch {
            let n = s.ids.len().min(self.max_sequence_length);
            let ids = &s.ids[..n];
            for i in 0..n {
                let window = Self::window_ids(ids, i);
                self.logits_into(&window, &mut probs);
                let y = s.tags[i];
                let lse = log_sum_exp(&probs);
                total += lse - probs[y];
                let Some(g) = grad.as_deref_mut() else {
                    continue;
                };
                for z in probs.iter_mut() {
                    *z = (*z - lse).exp();
                }
                probs[y] -= 1.0;
                for (k, &dz) in probs.iter().enumerate() {
                    let dz = dz * scale;
                    g.values[b0 + k] += dz;
                    let row = w0 + k * WINDOW * d;
                    for (slot, &id) in window.iter().enumerate() {
                        for j in 0..d {
                            g.values[row + slot * d + j] += dz * p[id * d + j];
                            g.values[id * d + j] += dz * p[row + slot * d + j];
                        }
                    }
                }
            }
        }
        Ok(total * scale)
    }

    /// Most likely tag per token; tokens beyond `max_sequence_length` get `O`.
    pub fn predict(&self, ids: &[usize]) -> Result<Vec<usize>, TrainError> {
        let mut out: Vec<usize> = self
            .forward(ids)?
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0
            })
            .collect();
        out.resize(ids.len(), 0);
        Ok(out)
    }

    /// Strict entity-level evaluation against gold tags.
    pub fn evaluate(&self, sentences: &[EncodedSentence], tagset: &TagSet) -> Result<EvalReport, TrainError> {
        let mut gold = Vec::with_capacity(sentences.len());
        let mut pred = Vec::with_capacity(sentences.len());
        for s in sentences {
            gold.push(s.tags.iter().map(|&y| tagset.name(y)).collect::<Vec<_>>());
            pred.push(self.predict(&s.ids)?.into_iter().map(|y| tagset.name(y)).collect::<Vec<_>>());
        }
        Ok(nermetrics::evaluate(&gold, &pred).expect("shapes match by construction"))
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax_in_place(z: &mut [f64]) {
    let lse = log_sum_exp(z);
    for v in z {
        *v = (*v - lse).exp();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    /// Decoupled weight decay, applied before the moment update.
    pub weight_decay: f64,
    pub bias_correction: bool,
    pub batch_size: usize,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.01,
            bias_correction: true,
            batch_size: 16,
            epsilon: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidOptimizer(m.to_string()));
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("betas must lie in (0, 1)");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

pub fn adam_step(
    state: &mut AdamState,
    params: &mut Parameters,
    grads: &Parameters,
    lr: f64,
    cfg: &OptimizerConfig,
) -> Result<(), TrainError> {
    let n = params.values.len();
    for len in [grads.values.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(TrainError::ShapeMismatch(n, len));
        }
    }
    state.step += 1;
    let (c1, c2) = if cfg.bias_correction {
        let t = state.step as i32;
        (1.0 - cfg.beta1.powi(t), 1.0 - cfg.beta2.powi(t))
    } else {
        (1.0, 1.0)
    };
    let decay = lr * cfg.weight_decay;
    for i in 0..n {
        let g = grads.values[i];
        let p = &mut params.values[i];
        *p -= decay * *p;
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub epochs_run: u32,
    /// Absent for epochs trained without a validation split.
    pub per_epoch_val_loss: Vec<Option<f64>>,
    /// Learning rate at the end of each epoch.
    pub per_epoch_lr: Vec<f64>,
    pub per_epoch_train_loss: Vec<f64>,
    pub model: TaggerModel,
    pub diverged: bool,
    /// The epoch cap was hit before the schedule stopped.
    pub capped: bool,
}

/// Trains `model` until the schedule stops, the loss turns non-finite, or
/// `max_epochs` is reached. The schedule's `steps_per_epoch` is derived from
/// the training split and batch size.
pub fn train(
    mut model: TaggerModel,
    train_split: &[EncodedSentence],
    val_split: &[EncodedSentence],
    schedule: &ScheduleConfig,
    opt: &OptimizerConfig,
    seed: u64,
    max_epochs: u32,
) -> Result<TrainOutcome, TrainError> {
    opt.validate()?;
    if train_split.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if val_split.is_empty() && schedule.is_adaptive() {
        return Err(TrainError::MissingValidation);
    }
    let steps = train_split.len().div_ceil(opt.batch_size);
    let cfg = schedule.with_steps_per_epoch(steps as u32);
    cfg.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = AdamState::new(model.params.values.len());
    let mut state = ScheduleState::new(&cfg);
    let mut order: Vec<usize> = (0..train_split.len()).collect();
    let mut out = TrainOutcome {
        epochs_run: 0,
        per_epoch_val_loss: Vec::new(),
        per_epoch_lr: Vec::new(),
        per_epoch_train_loss: Vec::new(),
        model: model.clone(),
        diverged: false,
        capped: false,
    };

    while !state.is_stopped() {
        if state.epochs_completed >= max_epochs {
            out.capped = true;
            break;
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, chunk) in order.chunks(opt.batch_size).enumerate() {
            let batch: Vec<&EncodedSentence> = chunk.iter().map(|&i| &train_split[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&batch)?;
            if !loss.is_finite() {
                out.diverged = true;
                break;
            }
            epoch_loss += loss;
            let lr = state.lr_for_step(&cfg, step as u32)?;
            adam_step(&mut adam, &mut model.params, &grads, lr, opt)?;
        }
        if out.diverged {
            break;
        }
        let epoch_end = f64::from(state.epochs_completed) + 1.0;
        out.per_epoch_lr.push(state.lr_at(&cfg, epoch_end)?);
        out.per_epoch_train_loss.push(epoch_loss / steps as f64);
        let (next, _) = if val_split.is_empty() {
            out.per_epoch_val_loss.push(None);
            state.complete_unmonitored_epoch(&cfg)?
        } else {
            let val = model.loss(val_split)?;
            out.per_epoch_val_loss.push(Some(val));
            if !val.is_finite() {
                out.diverged = true;
                break;
            }
            state.observe_validation_loss(&cfg, val)?
        };
        state = next;
    }
    out.epochs_run = out.per_epoch_lr.len() as u32;
    out.model = model;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(ids: &[usize], tags: &[usize]) -> EncodedSentence {
        EncodedSentence {
            ids: ids.to_vec(),
            tags: tags.to_vec(),
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = TaggerModel::zeros(5, 3, 4);
        for row in m.forward(&[2, 3, 4]).unwrap() {
            assert!(row.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        }
        let (loss, _) = TaggerModel::zeros(5, 2, 5)
            .loss_and_gradients(&[&sentence(&[2, 3], &[0, 4])])
            .unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
        assert!(m.forward(&[]).unwrap().is_empty());
    }

    #[test]
    fn softmax_by_hand() {
        let mut m = TaggerModel::zeros(3, 1, 2);
        let b0 = m.bias_offset();
        m.params.values[b0 + 1] = 3f64.ln();
        let rows = m.forward(&[2]).unwrap();
        assert!((rows[0][0] - 0.25).abs() < 1e-12);
        assert!((rows[0][1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn truncates_long_sentences() {
        let m = TaggerModel::random(4, 2, 3, 1).with_max_sequence_length(4);
        let ids = vec![2; 10];
        assert_eq!(m.forward(&ids).unwrap().len(), 4);
        let pred = m.predict(&ids).unwrap();
        assert_eq!(pred.len(), 10);
        assert!(pred[4..].iter().all(|&y| y == 0));
    }

    #[test]
    fn rows_sum_to_one() {
        let m = TaggerModel::random(10, 4, 5, 7);
        for row in m.forward(&[1, 2, 3, 9, 0]).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn confident_model_has_near_zero_loss() {
        let mut m = TaggerModel::zeros(3, 1, 2);
        let b0 = m.bias_offset();
        m.params.values[b0] = 50.0;
        let (loss, g) = m.loss_and_gradients(&[&sentence(&[2], &[0])]).unwrap();
        assert!(loss < 1e-20);
        assert!(g.values.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn rejects_bad_ids() {
        let m = TaggerModel::zeros(3, 1, 2);
        assert_eq!(
            m.loss_and_gradients(&[&sentence(&[2], &[2])]).unwrap_err(),
            TrainError::TagOutOfRange { id: 2, num_tags: 2 }
        );
        assert!(m.forward(&[3]).is_err());
        assert_eq!(m.loss_and_gradients(&[]).unwrap_err(), TrainError::EmptyBatch);
    }

    #[test]
    fn adam_examples() {
        let cfg = OptimizerConfig {
            weight_decay: 0.0,
            ..OptimizerConfig::default()
        };
        let mut p = Parameters { values: vec![0.3, -0.2] };
        let g = Parameters { values: vec![0.5, -2.0] };
        let mut s = AdamState::new(2);
        adam_step(&mut s, &mut p, &g, 0.0, &cfg).unwrap();
        assert_eq!(p.values, vec![0.3, -0.2]);

        let mut p = Parameters { values: vec![0.3, -0.2] };
        let mut s = AdamState::new(2);
        adam_step(&mut s, &mut p, &g, 0.01, &cfg).unwrap();
        assert!((p.values[0] - (0.3 - 0.01 * 0.5 / (0.5 + 1e-6))).abs() < 1e-15);
        assert!((p.values[1] - (-0.2 + 0.01 * 2.0 / (2.0 + 1e-6))).abs() < 1e-15);

        let mut p = Parameters { values: vec![1.0] };
        let mut s = AdamState::new(1);
        adam_step(&mut s, &mut p, &Parameters { values: vec![0.0] }, 2e-5, &OptimizerConfig::default()).unwrap();
        assert!((p.values[0] - (1.0 - 2e-7)).abs() < 1e-16);

        assert!(adam_step(&mut s, &mut p, &g, 0.1, &cfg).is_err());
    }

    fn toy_data(n: usize) -> Vec<EncodedSentence> {
        (0..n)
            .map(|i| {
                let ids: Vec<usize> = (0..5).map(|j| 2 + (i + j) % 6).collect();
                let tags = ids.iter().map(|&id| usize::from(id == 4)).collect();
                EncodedSentence { ids, tags }
            })
            .collect()
    }

    #[test]
    fn fixed_training_runs_total_epochs_and_is_deterministic() {
        let data = toy_data(40);
        let model = TaggerModel::random(8, 4, 2, 3);
        let cfg = ScheduleConfig::original().with_max_lr(0.05);
        let a = train(model.clone(), &data, &data[..8], &cfg, &OptimizerConfig::default(), 9, 500).unwrap();
        let b = train(model, &data, &data[..8], &cfg, &OptimizerConfig::default(), 9, 500).unwrap();
        assert_eq!(a.epochs_run, 5);
        assert_eq!(a.per_epoch_val_loss.len(), 5);
        assert_eq!(a, b);
        let first = a.per_epoch_val_loss[0].unwrap();
        let last = a.per_epoch_val_loss[4].unwrap();
        assert!(last < first);
        assert_eq!(*a.per_epoch_lr.last().unwrap(), 0.0);
    }

    #[test]
    fn zero_lr_keeps_validation_loss_constant() {
        let data = toy_data(20);
        let cfg = ScheduleConfig::stable().with_max_lr(0.0);
        let out = train(TaggerModel::random(8, 3, 2, 1), &data, &data, &cfg, &OptimizerConfig::default(), 1, 500).unwrap();
        let first = out.per_epoch_val_loss[0];
        assert!(out.per_epoch_val_loss.iter().all(|v| *v == first));
    }

    #[test]
    fn adaptive_needs_validation() {
        let data = toy_data(4);
        let r = train(TaggerModel::zeros(8, 2, 2), &data, &[], &ScheduleConfig::adaptive(), &OptimizerConfig::default(), 0, 10);
        assert_eq!(r.unwrap_err(), TrainError::MissingValidation);
    }

    #[test]
    fn unmonitored_fixed_training() {
        let data = toy_data(10);
        let out = train(TaggerModel::zeros(8, 2, 2), &data, &[], &ScheduleConfig::original(), &OptimizerConfig::default(), 0, 10).unwrap();
        assert_eq!(out.epochs_run, 5);
        assert!(out.per_epoch_val_loss.iter().all(Option::is_none));
    }

    #[test]
    fn cap_is_reported() {
        let data = toy_data(10);
        let out = train(TaggerModel::zeros(8, 2, 2), &data, &data, &ScheduleConfig::stable(), &OptimizerConfig::default(), 0, 3).unwrap();
        assert!(out.capped);
        assert_eq!(out.epochs_run, 3);
    }
}
