// SPDX-License-Identifier: MIT OR Apache-2.0

//! A small differentiable comment classifier.
//!
//! Tokens are hashed into embedding buckets, mean-pooled, passed through one
//! `tanh` hidden layer and an affine head. The head is either a two-way
//! softmax (not offensive / offensive) or three independent sigmoids for the
//! start/middle/end positional labels. Gradients are derived by hand.
//!
//! Parameters live in one flat `f64` vector split into named segments:
//!
//! | segment         | shape                          |
//! |-----------------|--------------------------------|
//! | `embedding`     | `(vocab_buckets + 4) x embed`  |
//! | `hidden.weight` | `hidden x embed`               |
//! | `hidden.bias`   | `hidden`                       |
//! | `head.weight`   | `outputs x hidden`             |
//! | `head.bias`     | `outputs`                      |
//!
//! The four rows after the hashed buckets hold BOS, EOS, MASK and PAD.

mod train;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matvec, Matrix};
use crate::seed;
use crate::text::tokenize;

pub use train::{train, Init, TrainConfig, TrainMeta, HOLDOUT_FRACTION};

/// Literal token text that encodes to the MASK embedding row.
pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Binary,
    Multilabel3,
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::Binary => 2,
            Head::Multilabel3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Head::Binary => "binary",
            Head::Multilabel3 => "multilabel3",
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which head output an explainer targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "TargetRepr", into = "TargetRepr")]
pub enum OutputTarget {
    /// Offensive class for a binary head; highest-scoring label otherwise.
    #[default]
    Auto,
    Index(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TargetRepr {
    Index(usize),
    Name(String),
}

impl TryFrom<TargetRepr> for OutputTarget {
    type Error = String;

    fn try_from(r: TargetRepr) -> core::result::Result<Self, String> {
        match r {
            TargetRepr::Index(i) => Ok(Self::Index(i)),
            TargetRepr::Name(s) if s == "auto" => Ok(Self::Auto),
            TargetRepr::Name(s) => Err(alloc::format!("unknown output target {s:?}")),
        }
    }
}

impl From<OutputTarget> for TargetRepr {
    fn from(t: OutputTarget) -> Self {
        match t {
            OutputTarget::Auto => Self::Name("auto".to_string()),
            OutputTarget::Index(i) => Self::Index(i),
        }
    }
}

impl OutputTarget {
    /// Picks the concrete output, given the model's output on the unperturbed
    /// input.
    pub fn resolve(self, head: Head, unperturbed: &[f64]) -> Result<usize> {
        match (self, head) {
            (Self::Index(i), _) if i < head.outputs() => Ok(i),
            (Self::Index(i), _) => Err(Error::OutputIndex {
                index: i,
                outputs: head.outputs(),
            }),
            (Self::Auto, Head::Binary) => Ok(1),
            (Self::Auto, Head::Multilabel3) => Ok(argmax(unperturbed)),
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Hashed vocabulary size; out-of-vocabulary words cannot occur.
    pub vocab_buckets: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub head: Head,
    /// Upper bound on encoded length, BOS and EOS included.
    pub max_seq_length: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_buckets: 32768,
            embed_dim: 64,
            hidden_dim: 128,
            head: Head::Binary,
            max_seq_length: 150,
            seed: 0,
        }
    }
}

/// Location of one named parameter block inside the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub name: &'static str,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

pub const SEGMENT_NAMES: [&str; 5] = ["embedding", "hidden.weight", "hidden.bias", "head.weight", "head.bias"];

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.vocab_buckets == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("model dimensions must be at least 1");
        }
        if self.max_seq_length < 3 {
            return bad("max_seq_length must leave room for BOS, one token and EOS");
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        self.head.outputs()
    }

    pub fn embedding_rows(&self) -> usize {
        self.vocab_buckets + 4
    }

    pub fn bos(&self) -> usize {
        self.vocab_buckets
    }

    pub fn eos(&self) -> usize {
        self.vocab_buckets + 1
    }

    pub fn mask(&self) -> usize {
        self.vocab_buckets + 2
    }

    pub fn pad(&self) -> usize {
        self.vocab_buckets + 3
    }

    pub fn segments(&self) -> [Segment; 5] {
        let shapes = [
            (self.embedding_rows(), self.embed_dim),
            (self.hidden_dim, self.embed_dim),
            (self.hidden_dim, 1),
            (self.outputs(), self.hidden_dim),
            (self.outputs(), 1),
        ];
        let mut offset = 0;
        let mut out = [Segment {
            name: "",
            offset: 0,
            rows: 0,
            cols: 0,
        }; 5];
        for ((seg, name), (rows, cols)) in out.iter_mut().zip(SEGMENT_NAMES).zip(shapes) {
            *seg = Segment {
                name,
                offset,
                rows,
                cols,
            };
            offset += rows * cols;
        }
        out
    }

    pub fn segment(&self, name: &str) -> Option<Segment> {
        self.segments().into_iter().find(|s| s.name == name)
    }

    pub fn parameter_count(&self) -> usize {
        self.segments().iter().map(Segment::len).sum()
    }

    /// Embedding row for one token.
    pub fn bucket(&self, token: &str) -> usize {
        if token == MASK_TOKEN {
            return self.mask();
        }
        let h = seed::fnv1a(token.to_lowercase().as_bytes());
        (h % self.vocab_buckets as u64) as usize
    }
}

/// `[BOS] + bucket(token)... + [EOS]`, keeping the first `max_seq_length - 2`
/// tokens.
pub fn encode(text: &str, config: &ModelConfig) -> Vec<usize> {
    let tokens = tokenize(text);
    encode_tokens(tokens.iter().map(|t| t.text()), config)
}

pub fn encode_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>, config: &ModelConfig) -> Vec<usize> {
    let room = config.max_seq_length.saturating_sub(2);
    let mut seq = Vec::with_capacity(room.min(64) + 2);
    seq.push(config.bos());
    seq.extend(tokens.into_iter().take(room).map(|t| config.bucket(t)));
    seq.push(config.eos());
    seq
}

/// Scalar that input gradients differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Softmax probability (binary) or sigmoid output (multilabel).
    Probability,
    /// Pre-activation head output.
    Logit,
}

/// Anything that maps a comment to head outputs.
pub trait Classifier {
    fn head(&self) -> Head;
    fn predict(&self, text: &str) -> Result<Vec<f64>>;
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Activations {
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    config: ModelConfig,
    params: Vec<f64>,
    meta: TrainMeta,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, params: Vec<f64>, meta: TrainMeta) -> Result<Self> {
        config.validate()?;
        let expected = config.parameter_count();
        if params.len() != expected {
            return Err(Error::ParameterCount {
                expected,
                found: params.len(),
            });
        }
        for seg in config.segments() {
            if params[seg.range()].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { segment: seg.name });
            }
        }
        Ok(Self { config, params, meta })
    }

    /// All-zero parameters: every output is uninformative.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let n = config.parameter_count();
        Self::new(config, vec![0.0; n], TrainMeta::default())
    }

    /// Glorot-uniform weights and zero biases, seeded by `config.seed`.
    pub fn glorot(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed::derive(config.seed, "init", 0));
        let mut params = vec![0.0; config.parameter_count()];
        for seg in config.segments() {
            if seg.name.ends_with("bias") {
                continue;
            }
            let limit = libm::sqrt(6.0 / (seg.rows + seg.cols) as f64);
            for p in &mut params[seg.range()] {
                *p = rng.gen_range(-limit..limit);
            }
        }
        Self::new(config, params, TrainMeta::default())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head(&self) -> Head {
        self.config.head
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn meta(&self) -> &TrainMeta {
        &self.meta
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        let seg = self.config.segment(name)?;
        Some(&self.params[seg.range()])
    }

    /// Mutable access for hand-built models. Values are checked for
    /// finiteness on every forward pass.
    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let seg = self.config.segment(name)?;
        Some(&mut self.params[seg.range()])
    }

    pub fn embedding_row(&self, index: usize) -> &[f64] {
        let d = self.config.embed_dim;
        &self.params[index * d..(index + 1) * d]
    }

    fn seg(&self, i: usize) -> &[f64] {
        &self.params[self.config.segments()[i].range()]
    }

    fn check_dense(&self) -> Result<()> {
        for seg in &self.config.segments()[1..] {
            if self.params[seg.range()].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { segment: seg.name });
            }
        }
        Ok(())
    }

    fn check_rows(&self, x: &Matrix) -> Result<()> {
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { segment: "embedding" });
        }
        Ok(())
    }

    /// Looks up the embedding rows of an index sequence.
    pub fn embed(&self, seq: &[usize]) -> Result<Matrix> {
        let d = self.config.embed_dim;
        let mut x = Matrix::zeros(seq.len(), d);
        for (i, &idx) in seq.iter().enumerate() {
            if idx >= self.config.embedding_rows() {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    len: self.config.embedding_rows(),
                });
            }
            x.row_mut(i).copy_from_slice(self.embedding_row(idx));
        }
        Ok(x)
    }

    pub fn forward(&self, seq: &[usize]) -> Result<Vec<f64>> {
        if seq.len() < 2 {
            return Err(Error::MalformedSequence);
        }
        let x = self.embed(seq)?;
        self.forward_from_embeddings(&x)
    }

    pub fn forward_from_embeddings(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.outputs)
    }

    pub(crate) fn activations(&self, x: &Matrix) -> Result<Activations> {
        let d = self.config.embed_dim;
        if x.rows() == 0 || x.cols() != d {
            return Err(Error::ShapeMismatch {
                expected_rows: x.rows().max(1),
                expected_cols: d,
                rows: x.rows(),
                cols: x.cols(),
            });
        }
        self.check_rows(x)?;
        self.check_dense()?;
        let mut pooled = vec![0.0; d];
        for row in x.iter_rows() {
            for (p, v) in pooled.iter_mut().zip(row) {
                *p += v;
            }
        }
        let inv = 1.0 / x.rows() as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);
        Ok(self.head_forward(pooled))
    }

    fn head_forward(&self, pooled: Vec<f64>) -> Activations {
        let (w1, b1, w2, b2) = (self.seg(1), self.seg(2), self.seg(3), self.seg(4));
        let mut hidden = vec![0.0; self.config.hidden_dim];
        matvec(w1, &pooled, &mut hidden);
        for (h, b) in hidden.iter_mut().zip(b1) {
            *h = libm::tanh(*h + b);
        }
        let mut logits = vec![0.0; self.config.outputs()];
        matvec(w2, &hidden, &mut logits);
        for (z, b) in logits.iter_mut().zip(b2) {
            *z += b;
        }
        let outputs = match self.config.head {
            Head::Binary => softmax(&logits),
            Head::Multilabel3 => logits.iter().map(|&z| sigmoid(z)).collect(),
        };
        Activations {
            pooled,
            hidden,
            logits,
            outputs,
        }
    }

    /// Gradient of the selected output probability with respect to every
    /// embedding cell.
    pub fn input_gradient(&self, x: &Matrix, output: usize) -> Result<Matrix> {
        self.input_gradient_of(x, output, Objective::Probability)
    }

    pub fn input_gradient_of(&self, x: &Matrix, output: usize, objective: Objective) -> Result<Matrix> {
        let k = self.config.outputs();
        if output >= k {
            return Err(Error::OutputIndex {
                index: output,
                outputs: k,
            });
        }
        let act = self.activations(x)?;
        let mut dz = vec![0.0; k];
        match (objective, self.config.head) {
            (Objective::Logit, _) => dz[output] = 1.0,
            (Objective::Probability, Head::Binary) => {
                let p = &act.outputs;
                for (j, g) in dz.iter_mut().enumerate() {
                    let delta = if j == output { 1.0 } else { 0.0 };
                    *g = p[output] * (delta - p[j]);
                }
            }
            (Objective::Probability, Head::Multilabel3) => {
                let p = act.outputs[output];
                dz[output] = p * (1.0 - p);
            }
        }
        let dpooled = self.backprop_to_pooled(&act, &dz, None);
        let inv = 1.0 / x.rows() as f64;
        let mut grad = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            for (g, v) in grad.row_mut(i).iter_mut().zip(&dpooled) {
                *g = v * inv;
            }
        }
        Ok(grad)
    }

    /// Pushes a logit gradient back to the pooled embedding. When `grads` is
    /// given, head and hidden parameter gradients are accumulated into it.
    pub(crate) fn backprop_to_pooled(&self, act: &Activations, dz: &[f64], grads: Option<&mut [f64]>) -> Vec<f64> {
        let segs = self.config.segments();
        let (h, d) = (self.config.hidden_dim, self.config.embed_dim);
        let (w1, w2) = (self.seg(1), self.seg(3));
        let mut dh = vec![0.0; h];
        for (j, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (a, w) in dh.iter_mut().zip(&w2[j * h..(j + 1) * h]) {
                *a += g * w;
            }
        }
        let da: Vec<f64> = dh.iter().zip(&act.hidden).map(|(g, hv)| g * (1.0 - hv * hv)).collect();
        let mut dpooled = vec![0.0; d];
        for (i, &g) in da.iter().enumerate() {
            for (p, w) in dpooled.iter_mut().zip(&w1[i * d..(i + 1) * d]) {
                *p += g * w;
            }
        }
        if let Some(grads) = grads {
            let gw2 = &mut grads[segs[3].range()];
            for (j, &g) in dz.iter().enumerate() {
                for (gw, hv) in gw2[j * h..(j + 1) * h].iter_mut().zip(&act.hidden) {
                    *gw += g * hv;
                }
            }
            for (gb, g) in grads[segs[4].range()].iter_mut().zip(dz) {
                *gb += g;
            }
            let gw1 = &mut grads[segs[1].range()];
            for (i, &g) in da.iter().enumerate() {
                for (gw, p) in gw1[i * d..(i + 1) * d].iter_mut().zip(&act.pooled) {
                    *gw += g * p;
                }
            }
            for (gb, g) in grads[segs[2].range()].iter_mut().zip(&da) {
                *gb += g;
            }
        }
        dpooled
    }

    /// Training loss of one encoded example, accumulating parameter gradients
    /// into `grads` (same layout as the parameters).
    pub(crate) fn loss_and_grad(&self, seq: &[usize], target: &Target, grads: &mut [f64]) -> Result<f64> {
        let x = self.embed(seq)?;
        let act = self.activations(&x)?;
        let (loss, dz) = loss_terms(&act.logits, &act.outputs, target);
        let dpooled = self.backprop_to_pooled(&act, &dz, Some(grads));
        let d = self.config.embed_dim;
        let inv = 1.0 / seq.len() as f64;
        for &idx in seq {
            for (g, v) in grads[idx * d..(idx + 1) * d].iter_mut().zip(&dpooled) {
                *g += v * inv;
            }
        }
        Ok(loss)
    }

    pub(crate) fn loss(&self, seq: &[usize], target: &Target) -> Result<f64> {
        let x = self.embed(seq)?;
        let act = self.activations(&x)?;
        Ok(loss_terms(&act.logits, &act.outputs, target).0)
    }
}

impl Classifier for Checkpoint {
    fn head(&self) -> Head {
        self.config.head
    }

    fn predict(&self, text: &str) -> Result<Vec<f64>> {
        self.forward(&encode(text, &self.config))
    }
}

/// Supervision for one example.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Target {
    Class(usize),
    Bits([f64; 3]),
}

/// Loss and its gradient with respect to the logits.
fn loss_terms(logits: &[f64], outputs: &[f64], target: &Target) -> (f64, Vec<f64>) {
    match target {
        Target::Class(y) => {
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + libm::log(logits.iter().map(|z| libm::exp(z - m)).sum::<f64>());
            let dz = outputs
                .iter()
                .enumerate()
                .map(|(j, p)| p - if j == *y { 1.0 } else { 0.0 })
                .collect();
            (lse - logits[*y], dz)
        }
        Target::Bits(t) => {
            let loss = logits
                .iter()
                .zip(t)
                .map(|(&z, &t)| z.max(0.0) - z * t + libm::log1p(libm::exp(-z.abs())))
                .sum();
            let dz = outputs.iter().zip(t).map(|(p, t)| p - t).collect();
            (loss, dz)
        }
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| libm::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}
