// SPDX-License-Identifier: MIT OR Apache-2.0

//! # offspan-core
//!
//! Zero-shot offensive span extraction from a sentence-level classifier.
//!
//! A comment classifier is trained only on comment-level labels (binary, or a
//! three-bit start/middle/end positional label). Character spans are then
//! recovered by explaining its predictions token by token, either with a LIME
//! surrogate fitted on masked perturbations or with integrated gradients along
//! a path from a boundary-token baseline. Token scores at or above a threshold
//! become predicted spans, which are scored with character-level F1.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints and
//! the command line live in the `offspan` crate.
//!
//! ```
//! use offspan_core::text::tokenize;
//!
//! let tokens = tokenize("Last scene vera level love u");
//! assert_eq!(tokens.len(), 6);
//! assert_eq!(tokens[2].text(), "vera");
//! ```

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attribution;
pub mod augment;
pub mod error;
pub mod eval;
pub mod ig;
pub mod lime;
pub mod linalg;
pub mod model;
pub mod seed;
pub mod spans;
pub mod synth;
pub mod text;

pub use attribution::{Attribution, Diagnostics};
pub use error::{Error, Result};
pub use model::{Checkpoint, Classifier, Head, ModelConfig, OutputTarget, TrainConfig};
pub use text::{CharRange, Comment, TokenSpan};
