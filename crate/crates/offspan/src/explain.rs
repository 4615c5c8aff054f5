// SPDX-License-Identifier: MIT OR Apache-2.0

//! Running explainers over datasets and the attribution file format.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use offspan_core::attribution::Diagnostics;
use offspan_core::ig::{explain_ig_outputs, IgConfig};
use offspan_core::lime::{explain_lime_outputs, LimeConfig};
use offspan_core::model::OutputTarget;
use offspan_core::spans::{decode_spans, merge_multilabel, SpanDecoderConfig};
use offspan_core::text::tokenize;
use offspan_core::{seed, Attribution, Checkpoint, Classifier, Comment, Head, TokenSpan};
use serde::{Deserialize, Serialize};

use crate::dataset::write_file;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lime,
    Ig,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Lime, Method::Ig];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lime => "lime",
            Method::Ig => "ig",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which head outputs to explain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Targets {
    /// Offensive class for binary heads, strongest label for multilabel ones.
    Auto,
    Index(usize),
    /// Offensive class for binary heads, all three labels for multilabel ones.
    All,
}

impl FromStr for Targets {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Targets::Auto),
            "all" => Ok(Targets::All),
            n => n
                .parse()
                .map(Targets::Index)
                .map_err(|_| format!("expected `auto`, `all` or an output index, found {n:?}")),
        }
    }
}

impl TryFrom<String> for Targets {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Targets> for String {
    fn from(t: Targets) -> String {
        t.to_string()
    }
}

impl fmt::Display for Targets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Targets::Auto => f.write_str("auto"),
            Targets::All => f.write_str("all"),
            Targets::Index(i) => write!(f, "{i}"),
        }
    }
}

impl Targets {
    pub fn resolve(self, ckpt: &Checkpoint, text: &str) -> Result<Vec<usize>> {
        Ok(match self {
            Targets::Index(i) => vec![i],
            Targets::All => match ckpt.head() {
                Head::Binary => vec![1],
                Head::Multilabel3 => vec![0, 1, 2],
            },
            Targets::Auto => vec![OutputTarget::Auto.resolve(ckpt.head(), &ckpt.predict(text)?)?],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub targets: Targets,
    pub lime: LimeConfig,
    pub ig: IgConfig,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            targets: Targets::Auto,
            lime: LimeConfig::default(),
            ig: IgConfig::default(),
        }
    }
}

/// Explains one comment. LIME draws its perturbations from a seed derived
/// from `lime.seed` and the comment id, so results do not depend on where
/// the comment sits in its file.
pub fn explain_comment(
    ckpt: &Checkpoint,
    comment: &Comment,
    method: Method,
    config: &ExplainConfig,
) -> Result<Vec<Attribution>> {
    let outputs = config.targets.resolve(ckpt, comment.text())?;
    if comment.tokens().is_empty() {
        return outputs
            .into_iter()
            .map(|o| {
                Ok(Attribution::new(
                    Vec::new(),
                    Vec::new(),
                    vec![o],
                    Diagnostics::default(),
                )?)
            })
            .collect();
    }
    let attributions = match method {
        Method::Lime => {
            let lime = LimeConfig {
                seed: seed::derive(config.lime.seed, comment.id(), 0),
                ..config.lime.clone()
            };
            explain_lime_outputs(ckpt, comment.text(), &lime, &outputs)?
        }
        Method::Ig => explain_ig_outputs(ckpt, comment.text(), &config.ig, &outputs)?,
    };
    Ok(attributions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputScores {
    pub output: usize,
    pub scores: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// One line of an attribution file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationRecord {
    pub id: String,
    pub text: String,
    pub method: Method,
    pub tokens: Vec<TokenSpan>,
    pub attributions: Vec<OutputScores>,
}

impl ExplanationRecord {
    pub fn new(comment: &Comment, method: Method, attributions: &[Attribution]) -> Self {
        Self {
            id: comment.id().to_string(),
            text: comment.text().to_string(),
            method,
            tokens: tokenize(comment.text()),
            attributions: attributions
                .iter()
                .map(|a| OutputScores {
                    output: a.outputs().first().copied().unwrap_or_default(),
                    scores: a.scores().to_vec(),
                    diagnostics: a.diagnostics().clone(),
                })
                .collect(),
        }
    }

    /// Rebuilds the attributions, checking the stored tokens against the text.
    pub fn to_attributions(&self) -> std::result::Result<Vec<Attribution>, String> {
        if tokenize(&self.text) != self.tokens {
            return Err(format!("tokens of {:?} do not match its text", self.id));
        }
        self.attributions
            .iter()
            .map(|o| {
                Attribution::new(
                    self.tokens.clone(),
                    o.scores.clone(),
                    vec![o.output],
                    o.diagnostics.clone(),
                )
                .map_err(|e| format!("{:?}: {e}", self.id))
            })
            .collect()
    }

    /// Predicted spans, merging per-output scores first when there are several.
    pub fn decode(&self, decoder: &SpanDecoderConfig) -> std::result::Result<Comment, String> {
        let attributions = self.to_attributions()?;
        let merged = match attributions.len() {
            0 => return Err(format!("{:?} has no attributions", self.id)),
            1 => attributions.into_iter().next().expect("one"),
            _ => {
                merge_multilabel(&attributions, decoder.merge_policy, decoder.merge_label).map_err(|e| e.to_string())?
            }
        };
        Comment::new(self.id.clone(), self.text.clone())
            .with_spans(&decode_spans(&merged, decoder))
            .map_err(|e| e.to_string())
    }
}

pub fn explain_dataset(
    ckpt: &Checkpoint,
    comments: &[Comment],
    method: Method,
    config: &ExplainConfig,
) -> Result<Vec<ExplanationRecord>> {
    comments
        .iter()
        .map(|c| {
            Ok(ExplanationRecord::new(
                c,
                method,
                &explain_comment(ckpt, c, method, config)?,
            ))
        })
        .collect()
}

pub fn records_to_jsonl(records: &[ExplanationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_records(path: &Path, records: &[ExplanationRecord]) -> Result<()> {
    write_file(path, records_to_jsonl(records).as_bytes())
}

pub fn read_records(path: &Path) -> Result<Vec<ExplanationRecord>> {
    let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn decode_records(records: &[ExplanationRecord], decoder: &SpanDecoderConfig, path: &Path) -> Result<Vec<Comment>> {
    decoder.validate()?;
    records
        .iter()
        .map(|r| r.decode(decoder).map_err(|m| Error::format(path, m)))
        .collect()
}
