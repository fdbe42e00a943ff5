//! Strict entity-level precision, recall and f1 (CoNLL-2003 scheme).
//!
//! An entity counts as correct only when type, first token and last token
//! all match. Span extraction follows conlleval: `I-X` without a preceding
//! `B-X`/`I-X` opens a new span.

use crate::corpus::tag_type;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("gold has {gold} sentences, prediction has {pred}")]
    SentenceCount { gold: usize, pred: usize },
    #[error("sentence {index}: gold has {gold} tags, prediction has {pred}")]
    SentenceLength { index: usize, gold: usize, pred: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub entity_type: String,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

/// Maximal entity spans of one tag sequence. Malformed tags are treated as `O`.
pub fn extract_entities<S: AsRef<str>>(tags: &[S]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(String, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let ty = tag_type(tag).ok().flatten();
        let continues = match (&open, ty) {
            (Some((cur, _)), Some(t)) => tag.starts_with("I-") && cur == t,
            _ => false,
        };
        if continues {
            continue;
        }
        if let Some((cur, start)) = open.take() {
            spans.push(EntitySpan {
                entity_type: cur,
                start,
                end: i - 1,
            });
        }
        if let Some(t) = ty {
            open = Some((t.to_string(), i));
        }
    }
    if let Some((cur, start)) = open {
        spans.push(EntitySpan {
            entity_type: cur,
            start,
            end: tags.len() - 1,
        });
    }
    spans
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: BTreeMap<String, Scores>,
    pub micro: Scores,
    /// Neither gold nor prediction contains a single entity; scores are reported as 1.
    pub zero_support: bool,
}

impl EvalReport {
    pub fn f1(&self) -> f64 {
        self.micro.f1
    }
}

pub fn evaluate<S: AsRef<str>, T: AsRef<str>>(
    gold: &[Vec<S>],
    pred: &[Vec<T>],
) -> Result<EvalReport, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::SentenceCount {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (index, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(MetricsError::SentenceLength {
                index,
                gold: g.len(),
                pred: p.len(),
            });
        }
        let gs: BTreeSet<EntitySpan> = extract_entities(g).into_iter().collect();
        let ps: BTreeSet<EntitySpan> = extract_entities(p).into_iter().collect();
        for span in gs.intersection(&ps) {
            counts.entry(span.entity_type.clone()).or_default().0 += 1;
        }
        for span in ps.difference(&gs) {
            counts.entry(span.entity_type.clone()).or_default().1 += 1;
        }
        for span in gs.difference(&ps) {
            counts.entry(span.entity_type.clone()).or_default().2 += 1;
        }
    }
    let per_class: BTreeMap<String, Scores> = counts
        .iter()
        .map(|(k, &(tp, fp, fn_))| (k.clone(), Scores::from_counts(tp, fp, fn_)))
        .collect();
    let (tp, fp, fn_) = counts
        .values()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let zero_support = tp + fp + fn_ == 0;
    let micro = if zero_support {
        Scores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            ..Scores::default()
        }
    } else {
        Scores::from_counts(tp, fp, fn_)
    };
    Ok(EvalReport {
        per_class,
        micro,
        zero_support,
    })
}
