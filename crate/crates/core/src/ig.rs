// SPDX-License-Identifier: MIT OR Apache-2.0

//! Integrated gradients over input embeddings.
//!
//! The baseline keeps the trained BOS and EOS rows and swaps every content row
//! for the PAD embedding, so it is a realizable input that carries no words.
//! Attributions accumulate `(x − x′) ⊙ ∂F/∂x` along the straight path from the
//! baseline to the input, and a token's score is the sum over its embedding
//! dimensions.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Diagnostics};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{encode_tokens, Checkpoint, OutputTarget};
use crate::text::tokenize;

/// Quadrature rule along the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathRule {
    /// Right-endpoint Riemann sum at `α = s/m`, `s = 1..m`.
    #[default]
    Right,
    /// Trapezoid rule over `α = s/m`, `s = 0..m`.
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// BOS and EOS kept, content rows set to PAD.
    #[default]
    BoundaryOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IgConfig {
    /// Path steps `m`.
    pub steps: usize,
    pub rule: PathRule,
    pub baseline: Baseline,
    pub target: OutputTarget,
    /// Completeness residual above which a warning is attached.
    pub completeness_tolerance: f64,
}

impl Default for IgConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            rule: PathRule::Right,
            baseline: Baseline::BoundaryOnly,
            target: OutputTarget::Auto,
            completeness_tolerance: 0.05,
        }
    }
}

impl IgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".to_string()));
        }
        if !(self.completeness_tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "completeness_tolerance must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Embedding matrix of the boundary-only baseline for `seq`.
pub fn make_baseline(ckpt: &Checkpoint, seq: &[usize]) -> Result<Matrix> {
    let c = ckpt.config();
    if seq.len() < 2 || seq[0] != c.bos() || seq[seq.len() - 1] != c.eos() {
        return Err(Error::MalformedSequence);
    }
    let mut x = ckpt.embed(seq)?;
    let pad = ckpt.embedding_row(c.pad());
    for i in 1..seq.len() - 1 {
        x.row_mut(i).copy_from_slice(pad);
    }
    Ok(x)
}

/// A scalar function of an embedding matrix with a known gradient.
pub trait Differentiable {
    fn gradient(&self, x: &Matrix, output: usize) -> Result<Matrix>;
}

impl Differentiable for Checkpoint {
    fn gradient(&self, x: &Matrix, output: usize) -> Result<Matrix> {
        self.input_gradient(x, output)
    }
}

/// Cell-wise attributions of output `output` for input `x` against
/// `baseline`. For a checkpoint the output is a probability.
pub fn integrated_gradients<F: Differentiable + ?Sized>(
    f: &F,
    x: &Matrix,
    baseline: &Matrix,
    steps: usize,
    rule: PathRule,
    output: usize,
) -> Result<Matrix> {
    baseline.expect_shape(x.rows(), x.cols())?;
    if steps == 0 {
        return Err(Error::InvalidConfig("steps must be at least 1".to_string()));
    }
    let delta: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(baseline.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let mut avg = vec![0.0; delta.len()];
    let mut point = baseline.clone();
    let m = steps as f64;
    let first = match rule {
        PathRule::Right => 1,
        PathRule::Trapezoid => 0,
    };
    for s in first..=steps {
        let alpha = s as f64 / m;
        for ((p, b), d) in point.as_mut_slice().iter_mut().zip(baseline.as_slice()).zip(&delta) {
            *p = b + alpha * d;
        }
        let weight = match rule {
            PathRule::Trapezoid if s == 0 || s == steps => 0.5 / m,
            _ => 1.0 / m,
        };
        let g = f.gradient(&point, output)?;
        for (a, gv) in avg.iter_mut().zip(g.as_slice()) {
            *a += weight * gv;
        }
    }
    let data = delta.iter().zip(&avg).map(|(d, g)| d * g).collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

/// Per-token integrated-gradient scores for the configured target output.
pub fn explain_ig(ckpt: &Checkpoint, text: &str, config: &IgConfig) -> Result<Attribution> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::Empty("comment has no tokens"));
    }
    let seq = encode_tokens(tokens.iter().map(|t| t.text()), ckpt.config());
    let output = config.target.resolve(ckpt.head(), &ckpt.forward(&seq)?)?;
    let mut out = explain_ig_outputs(ckpt, text, config, &[output])?;
    Ok(out.remove(0))
}

/// One attribution per requested head output.
pub fn explain_ig_outputs(
    ckpt: &Checkpoint,
    text: &str,
    config: &IgConfig,
    outputs: &[usize],
) -> Result<Vec<Attribution>> {
    config.validate()?;
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::Empty("comment has no tokens"));
    }
    let seq = encode_tokens(tokens.iter().map(|t| t.text()), ckpt.config());
    let x = ckpt.embed(&seq)?;
    let baseline = make_baseline(ckpt, &seq)?;
    let f_x = ckpt.forward_from_embeddings(&x)?;
    let f_base = ckpt.forward_from_embeddings(&baseline)?;

    outputs
        .iter()
        .map(|&o| {
            let k = ckpt.head().outputs();
            if o >= k {
                return Err(Error::OutputIndex { index: o, outputs: k });
            }
            let cells = integrated_gradients(ckpt, &x, &baseline, config.steps, config.rule, o)?;
            // Content rows 1..=len map onto tokens; truncated tokens score 0.
            let mut scores = vec![0.0; tokens.len()];
            for (i, s) in scores.iter_mut().enumerate().take(seq.len() - 2) {
                *s = cells.row(i + 1).iter().sum();
            }
            let residual = libm::fabs(cells.sum() - (f_x[o] - f_base[o]));
            let mut diagnostics = Diagnostics {
                completeness_residual: Some(residual),
                steps: Some(config.steps),
                ..Diagnostics::default()
            };
            if residual > config.completeness_tolerance {
                diagnostics.warnings.push(format!(
                    "completeness residual {residual:.4} exceeds tolerance {}",
                    config.completeness_tolerance
                ));
            }
            Attribution::new(tokens.clone(), scores, vec![o], diagnostics)
        })
        .collect()
}
