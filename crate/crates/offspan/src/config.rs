// SPDX-License-Identifier: MIT OR Apache-2.0

//! The single declarative run configuration.
//!
//! Loaded from TOML; every key can be overridden from the command line with
//! `--set section.key=value`, where `value` is parsed as a TOML value and
//! falls back to a plain string.

use std::fs;
use std::path::{Path, PathBuf};

use offspan_core::augment::{AugmentConfig, LexiconConfig};
use offspan_core::ig::IgConfig;
use offspan_core::lime::LimeConfig;
use offspan_core::spans::SpanDecoderConfig;
use offspan_core::synth::SynthConfig;
use offspan_core::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{ExplainConfig, Targets};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Generate every split from `[synth]` instead of reading files.
    pub synthetic: bool,
    pub classification_train: Option<PathBuf>,
    pub span_train: Option<PathBuf>,
    pub span_test: Option<PathBuf>,
    /// Non-offensive comments to augment.
    pub clean_source: Option<PathBuf>,
    /// Words dropped from the lexicon, one per line.
    pub stoplist: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub targets: Targets,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self { targets: Targets::Auto }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed for the random benchmark.
    pub seed: u64,
    pub data: DataPaths,
    pub synth: SynthConfig,
    pub lexicon: LexiconConfig,
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub explain: ExplainSection,
    pub lime: LimeConfig,
    pub ig: IgConfig,
    pub decoder: SpanDecoderConfig,
}

impl RunConfig {
    /// Defaults, then `file` if given, then each `key=value` override.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                source.parse::<toml::Table>().map_err(|e| Error::format(path, e))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let mut config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(base) = file.and_then(Path::parent) {
            config.data.resolve_relative(base);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.lexicon.validate()?;
        self.augment.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.lime.validate()?;
        self.ig.validate()?;
        self.decoder.validate()?;
        self.synth.validate()?;
        if self.train.seeds.is_empty() {
            return Err(Error::Config("train.seeds must list at least one seed".to_string()));
        }
        Ok(())
    }

    pub fn explain_config(&self) -> ExplainConfig {
        ExplainConfig {
            targets: self.explain.targets,
            lime: self.lime.clone(),
            ig: self.ig.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl DataPaths {
    fn resolve_relative(&mut self, base: &Path) {
        for p in [
            &mut self.classification_train,
            &mut self.span_train,
            &mut self.span_test,
            &mut self.clean_source,
            &mut self.stoplist,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `a.b.c=value` inside `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut cursor = table;
    for p in parents {
        let entry = cursor
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: `{p}` is not a table")))?;
    }
    cursor.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use offspan_core::Head;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.lime.num_samples, 5000);
        assert_eq!(c.decoder.threshold, -0.01);
    }

    #[test]
    fn overrides_parse_typed_values() {
        let c = RunConfig::load(
            None,
            &[
                "train.epochs=3".to_string(),
                "model.head=multilabel3".to_string(),
                "decoder.threshold=0.25".to_string(),
                "train.seeds=[7, 8]".to_string(),
                "explain.targets=all".to_string(),
                "lime.target=2".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.model.head, Head::Multilabel3);
        assert_eq!(c.decoder.threshold, 0.25);
        assert_eq!(c.train.seeds, [7, 8]);
        assert_eq!(c.explain.targets, Targets::All);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::load(None, &["train.gamma=0.1".to_string()]).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
        assert!(RunConfig::load(None, &["novalue".to_string()]).is_err());
        assert!(RunConfig::load(None, &["train..x=1".to_string()]).is_err());
    }

    #[test]
    fn file_paths_resolve_against_the_config_directory() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.toml");
        fs::write(
            &file,
            "[data]\nspan_test = \"test.jsonl\"\nspan_train = \"/abs/train.jsonl\"\n",
        )
        .unwrap();
        let c = RunConfig::load(Some(&file), &[]).unwrap();
        assert_eq!(c.data.span_test, Some(dir.path().join("test.jsonl")));
        assert_eq!(c.data.span_train, Some(PathBuf::from("/abs/train.jsonl")));
    }
}
