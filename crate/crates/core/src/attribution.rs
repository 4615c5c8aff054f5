// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::TokenSpan;

/// Per-run explainer diagnostics. Fields not produced by a method stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    /// Weighted R² of the LIME surrogate on its own samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// `|Σ attributions − (F(x) − F(baseline))|` for integrated gradients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completeness_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Token relevance scores for one explained model output (or a merge of
/// several).
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    tokens: Vec<TokenSpan>,
    scores: Vec<f64>,
    outputs: Vec<usize>,
    diagnostics: Diagnostics,
}

impl Attribution {
    /// Builds an attribution; scores must be finite and match the tokens.
    pub fn new(
        tokens: Vec<TokenSpan>,
        scores: Vec<f64>,
        outputs: Vec<usize>,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        if tokens.len() != scores.len() {
            return Err(Error::LengthMismatch {
                expected: tokens.len(),
                found: scores.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { segment: "attribution" });
        }
        Ok(Self {
            tokens,
            scores,
            outputs,
            diagnostics,
        })
    }

    pub fn tokens(&self) -> &[TokenSpan] {
        &self.tokens
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Head outputs this attribution explains; one entry unless merged.
    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TokenSpan, f64)> {
        self.tokens.iter().zip(self.scores.iter().copied())
    }
}
