// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid character range [{start}, {end})")]
    InvalidRange { start: usize, end: usize },

    #[error("span [{start}, {end}) out of bounds for text of {len} characters")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("comment {id:?} lacks the label required by a {head} head")]
    LabelMismatch { id: String, head: &'static str },

    #[error("non-finite value in parameter segment `{segment}`")]
    NonFinite { segment: &'static str },

    #[error("parameter count {found} does not match {expected} implied by the model config")]
    ParameterCount { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("output index {index} is invalid for a head with {outputs} outputs")]
    OutputIndex { index: usize, outputs: usize },

    #[error("embedding row {index} out of range for a table of {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("index sequence must start with BOS and end with EOS")]
    MalformedSequence,

    #[error("normal equations are rank deficient (pivot {pivot} of {size} vanished)")]
    RankDeficient { pivot: usize, size: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("attributions cover different token lists")]
    TokenMismatch,

    #[error("lexicon is empty after filtering; review the stoplist and phrase length limit")]
    EmptyLexicon,

    #[error("prediction {0:?} has no gold comment")]
    MissingGold(String),

    #[error("gold comment {0:?} has no prediction")]
    MissingPrediction(String),

    #[error("comment {0:?} already carries gold spans; augmentation sources must be span-free")]
    SourceHasSpans(String),
}
