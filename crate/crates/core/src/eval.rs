// SPDX-License-Identifier: MIT OR Apache-2.0

//! Character-level F1 and the two reference baselines.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::text::{char_slice, spans_to_charset, tokenize, CharRange, Comment};

/// Comments shorter than this many characters fall in the short bucket.
pub const SHORT_BELOW: usize = 30;
/// Comments longer than this many characters fall in the long bucket.
pub const LONG_ABOVE: usize = 50;

/// F1 over character index sets. Two empty sets score 1, one empty set 0.
pub fn char_f1(predicted: &[CharRange], gold: &[CharRange]) -> f64 {
    let p = spans_to_charset(predicted);
    let g = spans_to_charset(gold);
    match (p.is_empty(), g.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let common = p.intersection(&g).count();
            2.0 * common as f64 / (p.len() + g.len()) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bucket {
    #[serde(rename = "<30")]
    Short,
    #[serde(rename = "30-50")]
    Medium,
    #[serde(rename = ">50")]
    Long,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::Short, Bucket::Medium, Bucket::Long];

    /// Bucket for a comment of `chars` characters; 30 and 50 are medium.
    pub fn of(chars: usize) -> Self {
        if chars < SHORT_BELOW {
            Bucket::Short
        } else if chars <= LONG_ABOVE {
            Bucket::Medium
        } else {
            Bucket::Long
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::Short => "<30",
            Bucket::Medium => "30-50",
            Bucket::Long => ">50",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentScore {
    pub id: String,
    pub chars: usize,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// One entry per gold comment, in gold order.
    pub per_comment: Vec<CommentScore>,
    pub mean_f1: f64,
    /// Mean F1 per length bucket; `None` when the bucket is empty.
    pub buckets: BTreeMap<Bucket, Option<f64>>,
    /// Settings that produced the predictions, echoed for the record.
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn from_scores(per_comment: Vec<CommentScore>) -> Self {
        let mean = |it: &mut dyn Iterator<Item = f64>| {
            let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            (n > 0).then(|| sum / n as f64)
        };
        let mean_f1 = mean(&mut per_comment.iter().map(|s| s.f1)).unwrap_or(0.0);
        let buckets = Bucket::ALL
            .iter()
            .map(|&b| {
                let m = mean(&mut per_comment.iter().filter(|s| Bucket::of(s.chars) == b).map(|s| s.f1));
                (b, m)
            })
            .collect();
        Self {
            per_comment,
            mean_f1,
            buckets,
            config: BTreeMap::new(),
        }
    }

    pub fn with_config(mut self, config: BTreeMap<String, String>) -> Self {
        self.config = config;
        self
    }

    pub fn bucket(&self, bucket: Bucket) -> Option<f64> {
        self.buckets.get(&bucket).copied().flatten()
    }
}

/// Scores predictions against gold by comment id.
pub fn evaluate(predictions: &[Comment], gold: &[Comment]) -> Result<EvalReport> {
    let gold_ids: BTreeSet<&str> = gold.iter().map(Comment::id).collect();
    if let Some(extra) = predictions.iter().find(|p| !gold_ids.contains(p.id())) {
        return Err(Error::MissingGold(extra.id().to_string()));
    }
    let by_id: BTreeMap<&str, &Comment> = predictions.iter().map(|p| (p.id(), p)).collect();
    let per_comment = gold
        .iter()
        .map(|g| {
            let p = by_id
                .get(g.id())
                .ok_or_else(|| Error::MissingPrediction(g.id().to_string()))?;
            Ok(CommentScore {
                id: g.id().to_string(),
                chars: g.char_len(),
                f1: char_f1(p.spans_or_empty(), g.spans_or_empty()),
            })
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::from_scores(per_comment))
}

/// Predicts exactly `⌊len/2⌋` uniformly chosen characters per comment.
pub fn random_predictions(gold: &[Comment], seed: u64) -> Vec<Comment> {
    gold.iter()
        .enumerate()
        .map(|(i, g)| {
            let len = g.char_len();
            let mut rng = seed::rng(seed::derive(seed, "benchmark-random", i as u64));
            let mut picked = rand::seq::index::sample(&mut rng, len, len / 2).into_vec();
            picked.sort_unstable();
            let spans: Vec<CharRange> = picked
                .into_iter()
                .map(|c| CharRange::new(c, c + 1).expect("unit range"))
                .collect();
            Comment::new(g.id(), g.text())
                .with_spans(&spans)
                .expect("indices are within the text")
        })
        .collect()
}

pub fn benchmark_random(gold: &[Comment], seed: u64) -> Result<EvalReport> {
    evaluate(&random_predictions(gold, seed), gold)
}

/// Lowercased words found in the training gold spans.
pub fn span_vocabulary(train: &[Comment]) -> BTreeSet<String> {
    train
        .iter()
        .flat_map(|c| {
            c.spans_or_empty()
                .iter()
                .filter_map(|&s| char_slice(c.text(), s))
                .flat_map(|phrase| tokenize(phrase).into_iter().map(|t| t.text().to_lowercase()))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Marks every whole token whose lowercase form is in `words`.
pub fn lexicon_predictions(words: &BTreeSet<String>, test: &[Comment]) -> Vec<Comment> {
    test.iter()
        .map(|c| {
            let spans: Vec<CharRange> = tokenize(c.text())
                .into_iter()
                .filter(|t| words.contains(&t.text().to_lowercase()))
                .map(|t| t.range())
                .collect();
            Comment::new(c.id(), c.text())
                .with_spans(&spans)
                .expect("token ranges are within the text")
        })
        .collect()
}

pub fn benchmark_lexicon(train: &[Comment], test: &[Comment]) -> Result<EvalReport> {
    evaluate(&lexicon_predictions(&span_vocabulary(train), test), test)
}
