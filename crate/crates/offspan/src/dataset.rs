// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON-lines comment files and plain word lists.
//!
//! Every record has an `id` and `text`. Depending on the kind it also
//! carries a binary `label` (0 or 1), character `spans` as `[start, end)`
//! pairs counted in Unicode scalar values, or three positional `labels`.
//!
//! ```text
//! {"id":"c1","text":"you naaye","label":1}
//! {"id":"c1","text":"you naaye","spans":[[4,9]]}
//! {"id":"c1","text":"you naaye","labels":[0,0,1],"spans":[[4,9]]}
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use offspan_core::text::{BinaryLabel, PositionLabels};
use offspan_core::{CharRange, Comment};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    Classification,
    Span,
    Multilabel,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<[u8; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spans: Option<Vec<CharRange>>,
}

impl Record {
    fn into_comment(self, kind: RecordKind) -> std::result::Result<Comment, String> {
        let mut comment = Comment::new(self.id, self.text);
        if let Some(spans) = &self.spans {
            comment = comment.with_spans(spans).map_err(|e| e.to_string())?;
        }
        if let Some(bit) = self.label {
            let label = BinaryLabel::from_bit(bit).ok_or_else(|| format!("label must be 0 or 1, found {bit}"))?;
            comment = comment.with_label(label);
        }
        if let Some(bits) = self.labels {
            let labels = PositionLabels::from_bits(bits).ok_or("labels must be three 0/1 values")?;
            comment = comment.with_positions(labels);
        }
        let missing = match kind {
            RecordKind::Classification if comment.binary_label().is_none() => Some("label"),
            RecordKind::Span if comment.gold_spans().is_none() => Some("spans"),
            RecordKind::Multilabel if comment.position_labels().is_none() => Some("labels"),
            RecordKind::Multilabel if comment.gold_spans().is_none() => Some("spans"),
            _ => None,
        };
        match missing {
            Some(field) => Err(format!("missing `{field}` field")),
            None => Ok(comment),
        }
    }

    fn from_comment(comment: &Comment, kind: RecordKind) -> std::result::Result<Self, String> {
        let mut record = Record {
            id: comment.id().to_string(),
            text: comment.text().to_string(),
            label: None,
            labels: None,
            spans: None,
        };
        let lacks = |what: &str| format!("comment {:?} has no {what}", comment.id());
        match kind {
            RecordKind::Classification => {
                record.label = Some(comment.binary_label().ok_or_else(|| lacks("binary label"))?.bit());
            }
            RecordKind::Span => record.spans = Some(comment.spans_or_empty().to_vec()),
            RecordKind::Multilabel => {
                record.labels = Some(
                    comment
                        .position_labels()
                        .ok_or_else(|| lacks("positional labels"))?
                        .bits(),
                );
                record.spans = Some(comment.spans_or_empty().to_vec());
            }
        }
        Ok(record)
    }
}

/// Parses JSON-lines text. `path` only labels error messages.
pub fn parse_comments(source: &str, path: &Path, kind: RecordKind) -> Result<Vec<Comment>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (index, line) in source.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: index + 1,
            message,
        };
        let record: Record = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
        let comment = record.into_comment(kind).map_err(fail)?;
        if !seen.insert(comment.id().to_string()) {
            return Err(fail(format!("duplicate id {:?}", comment.id())));
        }
        out.push(comment);
    }
    Ok(out)
}

pub fn read_comments(path: &Path, kind: RecordKind) -> Result<Vec<Comment>> {
    let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_comments(&source, path, kind)
}

pub fn comments_to_jsonl(comments: &[Comment], kind: RecordKind) -> std::result::Result<String, String> {
    let mut out = String::new();
    for c in comments {
        let record = Record::from_comment(c, kind)?;
        out.push_str(&serde_json::to_string(&record).map_err(|e| e.to_string())?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_comments(path: &Path, comments: &[Comment], kind: RecordKind) -> Result<()> {
    let body = comments_to_jsonl(comments, kind).map_err(|m| Error::format(path, m))?;
    write_file(path, body.as_bytes())
}

/// One entry per non-blank line, surrounding whitespace trimmed.
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(source
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn write_word_list(path: &Path, words: &[String]) -> Result<()> {
    let mut body = words.join("\n");
    body.push('\n');
    write_file(path, body.as_bytes())
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
