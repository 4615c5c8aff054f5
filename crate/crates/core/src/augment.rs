// SPDX-License-Identifier: MIT OR Apache-2.0

//! Masked lexicon substitution and positional multilabel labelling.
//!
//! Masks here use `true` = *replace this token*. LIME's perturbation masks use
//! the opposite polarity; see [`crate::lime::keep_to_replace`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::text::{char_slice, tokenize, BinaryLabel, CharRange, Comment, PositionLabels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconConfig {
    /// Phrases of this many characters or more are skipped.
    pub max_phrase_chars: usize,
    /// Words dropped from the lexicon, compared case-insensitively.
    pub stoplist: BTreeSet<String>,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        Self {
            max_phrase_chars: 20,
            stoplist: BTreeSet::new(),
        }
    }
}

impl LexiconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_phrase_chars == 0 {
            return Err(Error::InvalidConfig("max_phrase_chars must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Offensive words in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    words: Vec<String>,
}

impl Lexicon {
    /// Deduplicates while keeping first occurrences; fails when nothing is left.
    pub fn new(words: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let words: Vec<String> = words
            .into_iter()
            .filter(|w| !w.is_empty() && seen.insert(w.clone()))
            .collect();
        if words.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        Ok(Self { words })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.iter().any(|w| w == word)
    }
}

pub fn build_lexicon(span_dataset: &[Comment], config: &LexiconConfig) -> Result<Lexicon> {
    config.validate()?;
    let stop: BTreeSet<String> = config.stoplist.iter().map(|w| w.to_lowercase()).collect();
    let mut words = Vec::new();
    for comment in span_dataset {
        for &span in comment.spans_or_empty() {
            let Some(phrase) = char_slice(comment.text(), span) else {
                continue;
            };
            if phrase.chars().count() >= config.max_phrase_chars {
                continue;
            }
            words.extend(
                tokenize(phrase)
                    .into_iter()
                    .map(|t| t.text().to_string())
                    .filter(|w| !stop.contains(&w.to_lowercase())),
            );
        }
    }
    Lexicon::new(words)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub masks_per_comment: usize,
    pub mask_probability: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            masks_per_comment: 3,
            mask_probability: 0.3,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.masks_per_comment == 0 {
            return Err(Error::InvalidConfig("masks_per_comment must be at least 1".to_string()));
        }
        if !(self.mask_probability > 0.0 && self.mask_probability < 1.0) {
            return Err(Error::InvalidConfig(
                "mask_probability must lie strictly between 0 and 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// `count` i.i.d. Bernoulli(`p`) masks of length `n`, each with at least one
/// set bit. An all-zero draw is redrawn once; a second all-zero draw gets one
/// uniformly chosen bit forced on.
pub fn generate_masks(n: usize, count: usize, p: f64, seed: u64) -> Vec<Vec<bool>> {
    if n == 0 {
        return vec![Vec::new(); count];
    }
    let mut rng = seed::rng(seed);
    let draw = |rng: &mut seed::Rng| -> Vec<bool> { (0..n).map(|_| rng.gen_bool(p)).collect() };
    (0..count)
        .map(|_| {
            let mut mask = draw(&mut rng);
            if !mask.contains(&true) {
                mask = draw(&mut rng);
            }
            if !mask.contains(&true) {
                mask[rng.gen_range(0..n)] = true;
            }
            mask
        })
        .collect()
}

/// Region (0 start, 1 middle, 2 end) of token `index` among `n` tokens.
pub fn region_of(index: usize, n: usize) -> usize {
    (3 * index) / n
}

/// Replaces every token whose mask bit is set with a uniformly drawn lexicon
/// word. Whitespace between tokens is kept verbatim. The result carries one
/// gold span per replaced word, an offensive label, and positional labels.
pub fn substitute(comment: &Comment, mask: &[bool], lexicon: &Lexicon, seed: u64) -> Result<Comment> {
    if lexicon.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    let text = comment.text();
    let tokens = tokenize(text);
    if mask.len() != tokens.len() {
        return Err(Error::LengthMismatch {
            expected: tokens.len(),
            found: mask.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut out_len = 0usize;
    let mut cursor = 0usize;
    let mut spans = Vec::new();
    let mut regions = [false; 3];
    for (i, (tok, &replace)) in tokens.iter().zip(mask).enumerate() {
        let r = tok.range();
        out.extend(&chars[cursor..r.start()]);
        out_len += r.start() - cursor;
        if replace {
            let word = &lexicon.words()[rng.gen_range(0..lexicon.len())];
            let len = word.chars().count();
            spans.push(CharRange::new(out_len, out_len + len)?);
            out.push_str(word);
            out_len += len;
            regions[region_of(i, tokens.len())] = true;
        } else {
            out.push_str(tok.text());
            out_len += r.len();
        }
        cursor = r.end();
    }
    out.extend(&chars[cursor..]);

    Comment::new(comment.id(), out).with_spans(&spans).map(|c| {
        c.with_label(BinaryLabel::Offensive)
            .with_positions(PositionLabels(regions))
    })
}

/// Positional labels implied by gold spans: region `b` is set when some token
/// overlapping a span lies in region `b`.
pub fn positions_from_spans(text: &str, spans: &[CharRange]) -> PositionLabels {
    let tokens = tokenize(text);
    let mut regions = [false; 3];
    for (i, tok) in tokens.iter().enumerate() {
        let r = tok.range();
        if spans.iter().any(|s| s.start() < r.end() && r.start() < s.end()) {
            regions[region_of(i, tokens.len())] = true;
        }
    }
    PositionLabels(regions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCorpus {
    /// Binary-labelled records: each original followed by its variants.
    pub classification: Vec<Comment>,
    /// The same records carrying positional labels and gold spans.
    pub multilabel: Vec<Comment>,
}

/// Expands clean comments into `source × (masks_per_comment + 1)` records.
///
/// Variant `k` of comment `id` is named `{id}-aug{k}` (1-based). Output order
/// follows source order, then mask index.
pub fn run_augmentation(source: &[Comment], lexicon: &Lexicon, config: &AugmentConfig) -> Result<AugmentedCorpus> {
    config.validate()?;
    if lexicon.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    let mut classification = Vec::with_capacity(source.len() * (config.masks_per_comment + 1));
    let mut multilabel = Vec::with_capacity(classification.capacity());
    for (index, comment) in source.iter().enumerate() {
        if comment.gold_spans().is_some_and(|s| !s.is_empty()) {
            return Err(Error::SourceHasSpans(comment.id().to_string()));
        }
        let n = comment.tokens().len();
        if n == 0 {
            return Err(Error::Empty("augmentation source comment has no tokens"));
        }
        let original = Comment::new(comment.id(), comment.text()).with_spans(&[])?;
        classification.push(original.clone().with_label(BinaryLabel::NotOffensive));
        multilabel.push(original.with_positions(PositionLabels([false; 3])));

        let index = index as u64;
        let masks = generate_masks(
            n,
            config.masks_per_comment,
            config.mask_probability,
            seed::derive(config.seed, "masks", index),
        );
        let sub_seed = seed::derive(config.seed, "substitute", index);
        for (k, mask) in masks.iter().enumerate() {
            let variant = substitute(comment, mask, lexicon, seed::derive(sub_seed, "variant", k as u64))?;
            let id = format!("{}-aug{}", comment.id(), k + 1);
            let spans = variant.spans_or_empty().to_vec();
            let labels = variant.position_labels().expect("substitute sets positions");
            let renamed = Comment::new(id, variant.text()).with_spans(&spans)?;
            classification.push(renamed.clone().with_label(BinaryLabel::Offensive));
            multilabel.push(renamed.with_positions(labels));
        }
    }
    Ok(AugmentedCorpus {
        classification,
        multilabel,
    })
}
