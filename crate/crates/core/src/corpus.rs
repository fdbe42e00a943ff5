//! BIO-tagged corpora: CoNLL-style reading and writing, deterministic
//! down-scaling, train+validation merging and a synthetic generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed tag {tag:?}")]
    MalformedTag { line: usize, tag: String },
    #[error("line {line}: expected at least a token and a tag column")]
    MissingColumn { line: usize },
    #[error("scaling factor {0} outside (0, 1]")]
    InvalidScale(f64),
    #[error("test split must stay unscaled (x_test = 1), got {0}")]
    ScaledTest(f64),
    #[error("{split} split would be empty after scaling by {x}")]
    EmptyAfterScaling { split: &'static str, x: f64 },
    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSynthetic(String),
    #[error("no {0} split file found")]
    MissingSplit(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One tagged sentence; `tokens` and `tags` have equal, non-zero length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Entity type of a BIO tag, or `None` for `O`. Returns `Err(())` for anything else.
pub fn tag_type(tag: &str) -> Result<Option<&str>, ()> {
    if tag == "O" {
        return Ok(None);
    }
    match tag.split_once('-') {
        Some(("B" | "I", ty)) if !ty.is_empty() => Ok(Some(ty)),
        _ => Err(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedCorpus {
    pub train: Vec<Sentence>,
    pub val: Vec<Sentence>,
    pub test: Vec<Sentence>,
    /// Sorted entity types occurring in any split.
    pub tag_vocabulary: Vec<String>,
    pub source_id: String,
}

impl TaggedCorpus {
    pub fn new(
        source_id: impl Into<String>,
        train: Vec<Sentence>,
        val: Vec<Sentence>,
        test: Vec<Sentence>,
    ) -> Self {
        let mut types = BTreeSet::new();
        for s in train.iter().chain(&val).chain(&test) {
            for t in &s.tags {
                if let Ok(Some(ty)) = tag_type(t) {
                    types.insert(ty.to_string());
                }
            }
        }
        Self {
            train,
            val,
            test,
            tag_vocabulary: types.into_iter().collect(),
            source_id: source_id.into(),
        }
    }

    /// Loads `train`, `val` and `test` files from a directory. Common aliases
    /// (`valid`, `dev`, `testa`/`testb`, `.txt` or `.conll` extensions) are accepted.
    pub fn load_dir(source_id: impl Into<String>, dir: &Path) -> Result<Self, CorpusError> {
        let find = |names: &[&str], split: &'static str| -> Result<Vec<Sentence>, CorpusError> {
            for name in names {
                for ext in ["", ".txt", ".conll", ".bio"] {
                    let path = dir.join(format!("{name}{ext}"));
                    if path.is_file() {
                        return parse_bio(io::BufReader::new(fs::File::open(path)?));
                    }
                }
            }
            Err(CorpusError::MissingSplit(split))
        };
        let train = find(&["train"], "train")?;
        let val = find(&["val", "valid", "dev", "validation", "testa"], "validation")?;
        let test = find(&["test", "testb"], "test")?;
        Ok(Self::new(source_id, train, val, test))
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir)?;
        for (name, split) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            let mut f = io::BufWriter::new(fs::File::create(dir.join(format!("{name}.txt")))?);
            serialize_bio(split, &mut f)?;
            f.flush()?;
        }
        Ok(())
    }
}

/// Parses token-per-line BIO text: first column token, last column tag,
/// blank lines between sentences. `-DOCSTART-` lines are skipped.
pub fn parse_bio<R: BufRead>(reader: R) -> Result<Vec<Sentence>, CorpusError> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<String>| {
        if !tokens.is_empty() {
            out.push(Sentence {
                tokens: std::mem::take(tokens),
                tags: std::mem::take(tags),
            });
        }
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let mut cols = line.split_whitespace();
        let Some(token) = cols.next() else {
            flush(&mut tokens, &mut tags);
            continue;
        };
        if token == "-DOCSTART-" {
            flush(&mut tokens, &mut tags);
            continue;
        }
        let Some(tag) = cols.last() else {
            return Err(CorpusError::MissingColumn { line: lineno });
        };
        if tag_type(tag).is_err() {
            return Err(CorpusError::MalformedTag {
                line: lineno,
                tag: tag.to_string(),
            });
        }
        tokens.push(token.to_string());
        tags.push(tag.to_string());
    }
    flush(&mut tokens, &mut tags);
    Ok(out)
}

pub fn parse_bio_str(text: &str) -> Result<Vec<Sentence>, CorpusError> {
    parse_bio(text.as_bytes())
}

/// Two-column output, tab separated, one blank line after every sentence.
pub fn serialize_bio<W: Write>(sentences: &[Sentence], mut w: W) -> io::Result<()> {
    for s in sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            writeln!(w, "{tok}\t{tag}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn serialize_bio_string(sentences: &[Sentence]) -> String {
    let mut buf = Vec::new();
    serialize_bio(sentences, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("tokens are valid UTF-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub x_train: f64,
    pub x_val: f64,
    pub x_test: f64,
}

impl ScalingSpec {
    /// Equal train and validation factors, test untouched.
    pub fn uniform(x: f64) -> Self {
        Self::new(x, x)
    }

    pub fn new(x_train: f64, x_val: f64) -> Self {
        Self {
            x_train,
            x_val,
            x_test: 1.0,
        }
    }
}

fn check_factor(x: f64) -> Result<(), CorpusError> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(CorpusError::InvalidScale(x))
    }
}

/// `⌈x·n⌉`, tolerant of the representation error in factors like 0.005.
pub fn scaled_size(x: f64, n: usize) -> usize {
    ((x * n as f64) - 1e-9).ceil().max(0.0) as usize
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Takes the first `⌈x·n⌉` entries of a permutation fixed by (seed, source, split),
/// so that smaller factors select subsets of larger ones. Original order is kept.
fn sample_split(
    split: &[Sentence],
    x: f64,
    seed: u64,
    source_id: &str,
    name: &'static str,
) -> Result<Vec<Sentence>, CorpusError> {
    check_factor(x)?;
    if x == 1.0 {
        return Ok(split.to_vec());
    }
    let k = scaled_size(x, split.len());
    if k == 0 {
        return Err(CorpusError::EmptyAfterScaling { split: name, x });
    }
    let stream = seed ^ fnv1a(source_id.as_bytes()).rotate_left(17) ^ fnv1a(name.as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut order: Vec<usize> = (0..split.len()).collect();
    order.shuffle(&mut rng);
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| split[i].clone()).collect())
}

/// Down-scales the train and validation splits; the test split is never touched.
pub fn scale(corpus: &TaggedCorpus, spec: ScalingSpec, seed: u64) -> Result<TaggedCorpus, CorpusError> {
    if spec.x_test != 1.0 {
        return Err(CorpusError::ScaledTest(spec.x_test));
    }
    let train = sample_split(&corpus.train, spec.x_train, seed, &corpus.source_id, "train")?;
    let val = sample_split(&corpus.val, spec.x_val, seed, &corpus.source_id, "val")?;
    Ok(TaggedCorpus {
        train,
        val,
        test: corpus.test.clone(),
        tag_vocabulary: corpus.tag_vocabulary.clone(),
        source_id: corpus.source_id.clone(),
    })
}

/// Appends the validation split to the training split and empties it.
pub fn merge_train_val(corpus: &TaggedCorpus) -> TaggedCorpus {
    let mut merged = corpus.clone();
    merged.train.extend(merged.val.drain(..));
    merged
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_sentences: usize,
    pub entity_types: Vec<String>,
    pub noise_rate: f64,
    pub seed: u64,
    /// Fractions of sentences assigned to train and validation; test gets the rest.
    #[serde(default = "default_split_ratio")]
    pub split_ratio: (f64, f64),
    #[serde(default = "default_filler_vocab")]
    pub filler_vocab: usize,
    #[serde(default = "default_names_per_type")]
    pub names_per_type: usize,
}

fn default_split_ratio() -> (f64, f64) {
    (0.7, 0.15)
}

fn default_filler_vocab() -> usize {
    300
}

fn default_names_per_type() -> usize {
    40
}

impl SyntheticSpec {
    pub fn new(num_sentences: usize, entity_types: &[&str], noise_rate: f64, seed: u64) -> Self {
        Self {
            num_sentences,
            entity_types: entity_types.iter().map(|s| s.to_string()).collect(),
            noise_rate,
            seed,
            split_ratio: default_split_ratio(),
            filler_vocab: default_filler_vocab(),
            names_per_type: default_names_per_type(),
        }
    }
}

const CUES_PER_TYPE: usize = 3;

/// Generates a corpus where each entity mention is introduced by a trigger
/// token of its type and consists of 1-3 names from a type-specific pool.
/// With probability `noise_rate` a mention's gold labels are corrupted
/// (dropped to `O`, or relabelled with another type when one exists).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TaggedCorpus, CorpusError> {
    if spec.num_sentences < 3 {
        return Err(CorpusError::InvalidSynthetic(
            "need at least 3 sentences (one per split)".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.noise_rate) {
        return Err(CorpusError::InvalidSynthetic(format!(
            "noise_rate {} outside [0, 1)",
            spec.noise_rate
        )));
    }
    if spec.entity_types.is_empty() || spec.entity_types.iter().any(|t| t.is_empty() || t.contains(char::is_whitespace)) {
        return Err(CorpusError::InvalidSynthetic("entity types must be non-empty words".into()));
    }
    let (r_train, r_val) = spec.split_ratio;
    if !(r_train > 0.0 && r_val > 0.0 && r_train + r_val < 1.0) {
        return Err(CorpusError::InvalidSynthetic("split ratios must be positive and sum below 1".into()));
    }
    if spec.filler_vocab == 0 || spec.names_per_type == 0 {
        return Err(CorpusError::InvalidSynthetic("vocabulary sizes must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.num_sentences;
    let mut sentences: Vec<Sentence> = (0..n).map(|_| synth_sentence(spec, &mut rng)).collect();
    let n_train = ((n as f64 * r_train).round() as usize).clamp(1, n - 2);
    let n_val = ((n as f64 * r_val).round() as usize).clamp(1, n - n_train - 1);
    let test = sentences.split_off(n_train + n_val);
    let val = sentences.split_off(n_train);
    Ok(TaggedCorpus::new(
        format!("synthetic-{}-{}", n, spec.seed),
        sentences,
        val,
        test,
    ))
}

fn synth_sentence(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Sentence {
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let filler_len = rng.gen_range(4..=10);
    let mentions = rng.gen_range(0..=2);
    let mut slots: Vec<usize> = (0..mentions).map(|_| rng.gen_range(0..=filler_len)).collect();
    slots.sort_unstable();
    let mut slot_iter = slots.into_iter().peekable();
    for pos in 0..=filler_len {
        while slot_iter.next_if_eq(&pos).is_some() {
            push_mention(spec, rng, &mut tokens, &mut tags);
        }
        if pos < filler_len {
            tokens.push(format!("w{}", rng.gen_range(0..spec.filler_vocab)));
            tags.push("O".to_string());
        }
    }
    Sentence { tokens, tags }
}

fn push_mention(spec: &SyntheticSpec, rng: &mut ChaCha8Rng, tokens: &mut Vec<String>, tags: &mut Vec<String>) {
    let types = &spec.entity_types;
    let ti = rng.gen_range(0..types.len());
    let ty = &types[ti];
    let lower = ty.to_lowercase();
    tokens.push(format!("cue.{lower}.{}", rng.gen_range(0..CUES_PER_TYPE)));
    tags.push("O".to_string());

    let len = rng.gen_range(1..=3);
    let label = if rng.gen::<f64>() < spec.noise_rate {
        if types.len() > 1 && rng.gen_bool(0.5) {
            let shift = rng.gen_range(1..types.len());
            Some(&types[(ti + shift) % types.len()])
        } else {
            None
        }
    } else {
        Some(ty)
    };
    for i in 0..len {
        tokens.push(format!("{lower}.{}", rng.gen_range(0..spec.names_per_type)));
        tags.push(match label {
            Some(l) if i == 0 => format!("B-{l}"),
            Some(l) => format!("I-{l}"),
            None => "O".to_string(),
        });
    }
}
