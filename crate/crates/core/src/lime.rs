// SPDX-License-Identifier: MIT OR Apache-2.0

//! LIME token attributions.
//!
//! Perturbed copies of a comment are made by replacing random subsets of its
//! tokens with a mask token. The classifier scores each copy, and a weighted
//! ridge regression of those scores on the keep/mask indicator vectors gives
//! one coefficient per token.
//!
//! Mask polarity: inside this module `true` means the token is *kept*. The
//! augmentation pipeline uses the opposite convention (`true` = replace); see
//! [`keep_to_replace`].

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Diagnostics};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};
use crate::model::{Classifier, OutputTarget, MASK_TOKEN};
use crate::seed;
use crate::text::{tokenize, TokenSpan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    /// Perturbed samples per comment, the unperturbed one included.
    pub num_samples: usize,
    /// Kernel width σ over the masked-fraction distance.
    pub kernel_width: f64,
    /// Ridge penalty λ on token coefficients (never on the intercept).
    pub ridge_lambda: f64,
    pub mask_token: String,
    pub seed: u64,
    pub target: OutputTarget,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            num_samples: 5000,
            kernel_width: 25.0,
            ridge_lambda: 1.0,
            mask_token: MASK_TOKEN.to_string(),
            seed: 0,
            target: OutputTarget::Auto,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.num_samples == 0 {
            return bad("num_samples must be at least 1");
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return bad("kernel_width must be positive");
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return bad("ridge_lambda must be non-negative");
        }
        Ok(())
    }
}

/// One perturbed copy of a comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perturbation {
    /// `true` where the original token is kept.
    pub keep: Vec<bool>,
    pub text: String,
}

/// Converts a keep-mask into the replace-mask used by augmentation.
pub fn keep_to_replace(keep: &[bool]) -> Vec<bool> {
    keep.iter().map(|k| !k).collect()
}

/// Rebuilds `text` with every token whose keep bit is `false` swapped for
/// `mask_token`. Whitespace between tokens is preserved.
pub fn masked_text(text: &str, tokens: &[TokenSpan], keep: &[bool], mask_token: &str) -> String {
    let offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    let mut out = String::with_capacity(text.len() + 8);
    let mut cursor = 0usize;
    for (tok, &k) in tokens.iter().zip(keep) {
        let start = offsets[tok.range().start()];
        out.push_str(&text[cursor..start]);
        out.push_str(if k { tok.text() } else { mask_token });
        cursor = start + tok.text().len();
    }
    out.push_str(&text[cursor..]);
    out
}

/// Draws `num_samples` perturbations. The first keeps every token; each later
/// one masks `k ~ U{1..n}` distinct positions chosen uniformly.
pub fn perturb(
    text: &str,
    tokens: &[TokenSpan],
    num_samples: usize,
    mask_token: &str,
    seed_value: u64,
) -> Result<Vec<Perturbation>> {
    let n = tokens.len();
    if n == 0 {
        return Err(Error::Empty("comment has no tokens"));
    }
    let mut rng = seed::rng(seed_value);
    let mut out = Vec::with_capacity(num_samples);
    for s in 0..num_samples {
        let mut keep = vec![true; n];
        if s > 0 {
            let k = rng.gen_range(1..=n);
            for i in rand::seq::index::sample(&mut rng, n, k).iter() {
                keep[i] = false;
            }
        }
        let text = masked_text(text, tokens, &keep, mask_token);
        out.push(Perturbation { keep, text });
    }
    Ok(out)
}

/// `exp(-d² / σ²)` where `d` is the fraction of masked positions.
pub fn proximity_weight(keep: &[bool], kernel_width: f64) -> f64 {
    if keep.is_empty() {
        return 1.0;
    }
    let masked = keep.iter().filter(|k| !**k).count();
    let d = masked as f64 / keep.len() as f64;
    libm::exp(-(d * d) / (kernel_width * kernel_width))
}

/// Fitted local linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Weighted coefficient of determination on the fitting samples.
    pub r2: f64,
}

/// Weighted ridge regression with an unpenalized intercept:
/// minimizes `Σ w_s (y_s − β₀ − β·m_s)² + λ‖β‖²`.
///
/// The intercept is eliminated by weighted centering, which leaves the
/// `n x n` normal equations `(Xᶜᵀ W Xᶜ + λI) β = Xᶜᵀ W yᶜ`.
pub fn fit_surrogate(masks: &[Vec<bool>], targets: &[f64], weights: &[f64], lambda: f64) -> Result<Surrogate> {
    let samples = masks.len();
    if samples == 0 {
        return Err(Error::Empty("surrogate samples"));
    }
    for len in [targets.len(), weights.len()] {
        if len != samples {
            return Err(Error::LengthMismatch {
                expected: samples,
                found: len,
            });
        }
    }
    let n = masks[0].len();
    if let Some(bad) = masks.iter().find(|m| m.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let w_total: f64 = weights.iter().sum();
    if !(w_total > 0.0) {
        return Err(Error::InvalidConfig(
            "sample weights must have a positive sum".to_string(),
        ));
    }

    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let mut x_mean = vec![0.0; n];
    let mut y_mean = 0.0;
    for ((m, &y), &w) in masks.iter().zip(targets).zip(weights) {
        for (xm, &b) in x_mean.iter_mut().zip(m) {
            *xm += w * bit(b);
        }
        y_mean += w * y;
    }
    x_mean.iter_mut().for_each(|v| *v /= w_total);
    y_mean /= w_total;

    let mut gram = Matrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    let mut centered = vec![0.0; n];
    for ((m, &y), &w) in masks.iter().zip(targets).zip(weights) {
        for ((c, &b), xm) in centered.iter_mut().zip(m).zip(&x_mean) {
            *c = bit(b) - xm;
        }
        let yc = y - y_mean;
        for i in 0..n {
            let wi = w * centered[i];
            rhs[i] += wi * yc;
            for j in 0..=i {
                gram[(i, j)] += wi * centered[j];
            }
        }
    }
    for i in 0..n {
        gram[(i, i)] += lambda;
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }

    let coefficients = cholesky_solve(&gram, &rhs)?;
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, x)| b * x).sum::<f64>();

    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for ((m, &y), &w) in masks.iter().zip(targets).zip(weights) {
        let pred = intercept + coefficients.iter().zip(m).map(|(b, &k)| b * bit(k)).sum::<f64>();
        ss_res += w * (y - pred) * (y - pred);
        ss_tot += w * (y - y_mean) * (y - y_mean);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(Surrogate {
        intercept,
        coefficients,
        r2,
    })
}

/// Explains the configured target output of `model` on `text`.
pub fn explain_lime<C: Classifier + ?Sized>(model: &C, text: &str, config: &LimeConfig) -> Result<Attribution> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::Empty("comment has no tokens"));
    }
    let unperturbed = model.predict(text)?;
    let output = config.target.resolve(model.head(), &unperturbed)?;
    let mut out = explain_lime_outputs(model, text, config, &[output])?;
    Ok(out.remove(0))
}

/// Explains several head outputs from one shared set of perturbations.
pub fn explain_lime_outputs<C: Classifier + ?Sized>(
    model: &C,
    text: &str,
    config: &LimeConfig,
    outputs: &[usize],
) -> Result<Vec<Attribution>> {
    config.validate()?;
    let k = model.head().outputs();
    if let Some(&bad) = outputs.iter().find(|&&o| o >= k) {
        return Err(Error::OutputIndex { index: bad, outputs: k });
    }
    let tokens = tokenize(text);
    let samples = perturb(text, &tokens, config.num_samples, &config.mask_token, config.seed)?;
    let mut scored = Vec::with_capacity(samples.len());
    for s in &samples {
        scored.push(model.predict(&s.text)?);
    }
    let masks: Vec<Vec<bool>> = samples.into_iter().map(|s| s.keep).collect();
    let weights: Vec<f64> = masks.iter().map(|m| proximity_weight(m, config.kernel_width)).collect();

    outputs
        .iter()
        .map(|&o| {
            let y: Vec<f64> = scored.iter().map(|p| p[o]).collect();
            let fit = fit_surrogate(&masks, &y, &weights, config.ridge_lambda)?;
            let diagnostics = Diagnostics {
                surrogate_r2: Some(fit.r2),
                samples: Some(masks.len()),
                ..Diagnostics::default()
            };
            Attribution::new(tokens.clone(), fit.coefficients, vec![o], diagnostics)
        })
        .collect()
}
