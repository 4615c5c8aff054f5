// SPDX-License-Identifier: MIT OR Apache-2.0

//! Comments, character ranges and whitespace tokenization.
//!
//! All offsets count unicode scalar values, not bytes. Ranges are half-open.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open character range `[start, end)` with `start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct CharRange {
    start: usize,
    end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start < end {
            Ok(Self { start, end })
        } else {
            Err(Error::InvalidRange { start, end })
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn indices(&self) -> core::ops::Range<usize> {
        self.start..self.end
    }

    /// Errors unless the range fits inside a text of `len` characters.
    pub fn check_within(&self, len: usize) -> Result<()> {
        if self.end <= len {
            Ok(())
        } else {
            Err(Error::SpanOutOfBounds {
                start: self.start,
                end: self.end,
                len,
            })
        }
    }
}

impl TryFrom<[usize; 2]> for CharRange {
    type Error = Error;

    fn try_from([start, end]: [usize; 2]) -> Result<Self> {
        Self::new(start, end)
    }
}

impl From<CharRange> for [usize; 2] {
    fn from(r: CharRange) -> Self {
        [r.start, r.end]
    }
}

impl fmt::Display for CharRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// A whitespace-delimited token and where it sits in its comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    text: String,
    range: CharRange,
}

impl TokenSpan {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn range(&self) -> CharRange {
        self.range
    }
}

/// Splits on runs of unicode whitespace. Punctuation stays attached.
pub fn tokenize(text: &str) -> Vec<TokenSpan> {
    let mut tokens = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    let mut chars = 0;
    for (ci, (bi, ch)) in text.char_indices().enumerate() {
        chars = ci + 1;
        if ch.is_whitespace() {
            if let Some((cs, bs)) = open.take() {
                tokens.push(TokenSpan {
                    text: text[bs..bi].to_string(),
                    range: CharRange { start: cs, end: ci },
                });
            }
        } else if open.is_none() {
            open = Some((ci, bi));
        }
    }
    if let Some((cs, bs)) = open {
        tokens.push(TokenSpan {
            text: text[bs..].to_string(),
            range: CharRange { start: cs, end: chars },
        });
    }
    tokens
}

/// Length of `text` in characters.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// The substring covered by a character range, if it fits.
pub fn char_slice(text: &str, range: CharRange) -> Option<&str> {
    let mut bounds = text.char_indices().map(|(b, _)| b).chain(core::iter::once(text.len()));
    let start = bounds.nth(range.start)?;
    let end = if range.len() == 0 {
        start
    } else {
        bounds.nth(range.len() - 1)?
    };
    Some(&text[start..end])
}

/// Sorts ranges and merges those that overlap or touch.
pub fn normalize_spans(spans: &[CharRange]) -> Vec<CharRange> {
    let mut sorted = spans.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<CharRange> = Vec::with_capacity(sorted.len());
    for r in sorted {
        match out.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => out.push(r),
        }
    }
    out
}

/// Union of half-open ranges as a set of character indices.
pub fn spans_to_charset(spans: &[CharRange]) -> BTreeSet<usize> {
    spans.iter().flat_map(CharRange::indices).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryLabel {
    NotOffensive,
    Offensive,
}

impl BinaryLabel {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Self::NotOffensive),
            1 => Some(Self::Offensive),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Self::NotOffensive => 0,
            Self::Offensive => 1,
        }
    }
}

/// Whether offensive content occurs in the start, middle and end thirds of a
/// comment's tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PositionLabels(pub [bool; 3]);

impl PositionLabels {
    pub fn from_bits(bits: [u8; 3]) -> Option<Self> {
        let mut out = [false; 3];
        for (o, b) in out.iter_mut().zip(bits) {
            *o = match b {
                0 => false,
                1 => true,
                _ => return None,
            };
        }
        Some(Self(out))
    }

    pub fn bits(self) -> [u8; 3] {
        self.0.map(u8::from)
    }

    pub fn start(self) -> bool {
        self.0[0]
    }

    pub fn middle(self) -> bool {
        self.0[1]
    }

    pub fn end(self) -> bool {
        self.0[2]
    }

    pub fn any(self) -> bool {
        self.0.iter().any(|&b| b)
    }
}

/// A comment with whatever annotations its dataset carries.
///
/// Gold spans are validated against the text and kept normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    id: String,
    text: String,
    gold_spans: Option<Vec<CharRange>>,
    binary_label: Option<BinaryLabel>,
    position_labels: Option<PositionLabels>,
}

impl Comment {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold_spans: None,
            binary_label: None,
            position_labels: None,
        }
    }

    /// Attaches gold spans, rejecting any that fall outside the text.
    pub fn with_spans(mut self, spans: &[CharRange]) -> Result<Self> {
        let len = char_len(&self.text);
        for r in spans {
            r.check_within(len)?;
        }
        self.gold_spans = Some(normalize_spans(spans));
        Ok(self)
    }

    pub fn with_label(mut self, label: BinaryLabel) -> Self {
        self.binary_label = Some(label);
        self
    }

    pub fn with_positions(mut self, labels: PositionLabels) -> Self {
        self.position_labels = Some(labels);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn gold_spans(&self) -> Option<&[CharRange]> {
        self.gold_spans.as_deref()
    }

    /// Gold spans, treating a missing annotation as no spans.
    pub fn spans_or_empty(&self) -> &[CharRange] {
        self.gold_spans.as_deref().unwrap_or(&[])
    }

    pub fn binary_label(&self) -> Option<BinaryLabel> {
        self.binary_label
    }

    pub fn position_labels(&self) -> Option<PositionLabels> {
        self.position_labels
    }

    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }

    pub fn tokens(&self) -> Vec<TokenSpan> {
        tokenize(&self.text)
    }
}
