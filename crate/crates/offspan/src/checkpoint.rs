// SPDX-License-Identifier: MIT OR Apache-2.0

//! Versioned JSON checkpoint container.
//!
//! Parameters are stored per named segment as base64 of little-endian
//! `f64` values, so a round trip is bit-exact.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use offspan_core::model::TrainMeta;
use offspan_core::{Checkpoint, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::write_file;
use crate::error::{Error, Result};

pub const FORMAT: &str = "offspan-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRecord {
    name: String,
    shape: [usize; 2],
    data: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    segments: Vec<SegmentRecord>,
    train_meta: TrainMeta,
}

pub fn to_json(ckpt: &Checkpoint) -> String {
    let segments = ckpt
        .config()
        .segments()
        .iter()
        .map(|seg| {
            let values = &ckpt.params()[seg.range()];
            let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
            SegmentRecord {
                name: seg.name.to_string(),
                shape: [seg.rows, seg.cols],
                data: STANDARD.encode(bytes),
            }
        })
        .collect();
    let file = CheckpointFile {
        format: FORMAT.to_string(),
        version: VERSION,
        config: ckpt.config().clone(),
        segments,
        train_meta: ckpt.meta().clone(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
    out.push('\n');
    out
}

pub fn from_json(source: &str, path: &Path) -> Result<Checkpoint> {
    let file: CheckpointFile = serde_json::from_str(source).map_err(|e| Error::format(path, e))?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint {:?} version {}", file.format, file.version),
        ));
    }
    file.config.validate()?;
    let expected = file.config.segments();
    if file.segments.len() != expected.len() {
        return Err(Error::format(
            path,
            format!("expected {} segments, found {}", expected.len(), file.segments.len()),
        ));
    }
    let mut params = Vec::with_capacity(file.config.parameter_count());
    for (want, got) in expected.iter().zip(&file.segments) {
        if got.name != want.name || got.shape != [want.rows, want.cols] {
            return Err(Error::format(
                path,
                format!(
                    "segment {:?} {:?} does not match {:?} {:?} implied by the config",
                    got.name,
                    got.shape,
                    want.name,
                    [want.rows, want.cols]
                ),
            ));
        }
        let bytes = STANDARD
            .decode(&got.data)
            .map_err(|e| Error::format(path, format!("segment {:?}: {e}", got.name)))?;
        if bytes.len() != want.len() * 8 {
            return Err(Error::format(
                path,
                format!(
                    "segment {:?} holds {} bytes, expected {}",
                    got.name,
                    bytes.len(),
                    want.len() * 8
                ),
            ));
        }
        params.extend(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))),
        );
    }
    Ok(Checkpoint::new(file.config, params, file.train_meta)?)
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_file(path, to_json(ckpt).as_bytes())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&source, path)
}
