// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded synthetic corpora with planted offensive words.
//!
//! Comments are built from romanized pseudo-words drawn from a Zipfian clean
//! vocabulary. Offensive comments have between one and three positions
//! replaced by words from a disjoint offensive lexicon, and the replaced
//! words are the gold spans. Because the ground truth is planted, span
//! extractors can be scored without any annotated data.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::text::{BinaryLabel, CharRange, Comment};

const ONSETS: [&str; 18] = [
    "k", "p", "t", "m", "n", "v", "s", "l", "r", "th", "ch", "nd", "d", "g", "b", "y", "zh", "",
];
const VOWELS: [&str; 8] = ["a", "aa", "e", "i", "o", "u", "ai", "ee"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Total comments across every split.
    pub comments: usize,
    pub lexicon_size: usize,
    pub clean_vocabulary: usize,
    /// Zipf exponent of the clean word distribution.
    pub zipf_exponent: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Comments in the binary classification training split.
    pub classification_train: usize,
    /// Offensive comments with gold spans for lexicon building.
    pub span_train: usize,
    /// Offensive comments with gold spans for evaluation.
    pub span_test: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            comments: 2000,
            lexicon_size: 200,
            clean_vocabulary: 3000,
            zipf_exponent: 1.05,
            min_tokens: 3,
            max_tokens: 16,
            classification_train: 1000,
            span_train: 300,
            span_test: 200,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.lexicon_size == 0 || self.clean_vocabulary == 0 {
            return bad("vocabularies must be non-empty");
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad("token bounds must satisfy 1 <= min_tokens <= max_tokens");
        }
        if self.classification_train + self.span_train + self.span_test > self.comments {
            return bad("splits exceed the total comment count");
        }
        if !(self.zipf_exponent > 0.0 && self.zipf_exponent.is_finite()) {
            return bad("zipf_exponent must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Planted offensive words; disjoint from the clean vocabulary.
    pub lexicon: Vec<String>,
    /// Half offensive, half clean, labelled only at sentence level.
    pub classification_train: Vec<Comment>,
    /// Offensive comments with gold spans.
    pub span_train: Vec<Comment>,
    /// Offensive comments with gold spans, held out for evaluation.
    pub span_test: Vec<Comment>,
    /// Clean comments for augmentation; everything left over.
    pub clean_source: Vec<Comment>,
}

fn pseudo_word(rng: &mut Rng, syllables: core::ops::RangeInclusive<usize>) -> String {
    let n = rng.gen_range(syllables);
    (0..n)
        .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
        .collect()
}

fn starred(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() < 4 {
        return word.to_string();
    }
    let mut out = String::new();
    out.push(chars[0]);
    out.push_str("**");
    out.extend(&chars[3..]);
    out
}

fn distinct_words(rng: &mut Rng, count: usize, taken: &mut BTreeSet<String>, offensive: bool) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut w = pseudo_word(rng, if offensive { 2..=3 } else { 1..=4 });
        if offensive && rng.gen_bool(0.3) {
            w = starred(&w);
        }
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Generator<'a> {
    clean: &'a [String],
    zipf: WeightedIndex<f64>,
    lexicon: &'a [String],
    min_tokens: usize,
    max_tokens: usize,
}

impl Generator<'_> {
    fn words(&self, rng: &mut Rng) -> Vec<String> {
        let n = rng.gen_range(self.min_tokens..=self.max_tokens);
        let mut words: Vec<String> = (0..n).map(|_| self.clean[self.zipf.sample(rng)].clone()).collect();
        if rng.gen_bool(0.2) {
            let first = &mut words[0];
            *first = capitalize(first);
        }
        words
    }

    fn clean(&self, rng: &mut Rng, id: String) -> Comment {
        Comment::new(id, self.words(rng).join(" ")).with_label(BinaryLabel::NotOffensive)
    }

    fn offensive(&self, rng: &mut Rng, id: String) -> Comment {
        let mut words = self.words(rng);
        let planted = rng.gen_range(1..=3usize.min(words.len()));
        let positions = rand::seq::index::sample(rng, words.len(), planted);
        for p in positions.iter() {
            words[p] = self.lexicon.choose(rng).unwrap().clone();
        }
        let mut marked: Vec<usize> = positions.into_vec();
        marked.sort_unstable();
        let mut spans = Vec::new();
        let mut offset = 0usize;
        for (i, w) in words.iter().enumerate() {
            let len = w.chars().count();
            if marked.binary_search(&i).is_ok() {
                spans.push(CharRange::new(offset, offset + len).expect("ordered"));
            }
            offset += len + 1;
        }
        Comment::new(id, words.join(" "))
            .with_spans(&spans)
            .expect("spans lie within the text")
            .with_label(BinaryLabel::Offensive)
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Generates every split deterministically from `config.seed`.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = seed::rng(seed::derive(config.seed, "synth-vocabulary", 0));
    let mut taken = BTreeSet::new();
    let lexicon = distinct_words(&mut rng, config.lexicon_size, &mut taken, true);
    let clean = distinct_words(&mut rng, config.clean_vocabulary, &mut taken, false);
    let weights: Vec<f64> = (1..=clean.len())
        .map(|rank| libm::pow(rank as f64, -config.zipf_exponent))
        .collect();
    let generator = Generator {
        clean: &clean,
        zipf: WeightedIndex::new(&weights).map_err(|_| Error::InvalidConfig("bad Zipf weights".to_string()))?,
        lexicon: &lexicon,
        min_tokens: config.min_tokens,
        max_tokens: config.max_tokens,
    };

    let mut rng = seed::rng(seed::derive(config.seed, "synth-comments", 0));
    let mut classification_train = Vec::with_capacity(config.classification_train);
    for i in 0..config.classification_train {
        let id = format!("cls-{i:04}");
        classification_train.push(if i % 2 == 0 {
            generator.offensive(&mut rng, id)
        } else {
            generator.clean(&mut rng, id)
        });
    }
    let span_train = (0..config.span_train)
        .map(|i| generator.offensive(&mut rng, format!("span-train-{i:04}")))
        .collect();
    let span_test = (0..config.span_test)
        .map(|i| generator.offensive(&mut rng, format!("span-test-{i:04}")))
        .collect();
    let rest = config.comments - config.classification_train - config.span_train - config.span_test;
    let clean_source = (0..rest)
        .map(|i| generator.clean(&mut rng, format!("clean-{i:04}")))
        .collect();

    Ok(SynthCorpus {
        lexicon,
        classification_train,
        span_train,
        span_test,
        clean_source,
    })
}
