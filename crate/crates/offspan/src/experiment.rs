// SPDX-License-Identifier: MIT OR Apache-2.0

//! Preset experiments: train, explain the span test set with both methods,
//! decode, evaluate, and repeat over the configured seeds.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use offspan_core::augment::{build_lexicon, run_augmentation, LexiconConfig};
use offspan_core::eval::{benchmark_lexicon, benchmark_random, evaluate, EvalReport};
use offspan_core::model::train;
use offspan_core::spans::MergePolicy;
use offspan_core::synth;
use offspan_core::{seed, Checkpoint, Comment, Head};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::dataset::{comments_to_jsonl, read_comments, read_word_list, write_file, RecordKind};
use crate::error::{Error, Result};
use crate::explain::{decode_records, explain_dataset, records_to_jsonl, ExplanationRecord, Method, Targets};
use crate::report::{report_json, summary_table, Summary};

pub const MANIFEST_FORMAT: &str = "offspan-manifest";
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Binary classifier on the sentence-labelled training split.
    OsBaseline,
    /// Binary classifier on mask-augmented clean comments.
    OsAugmentation,
    /// Positional three-label classifier on mask-augmented clean comments.
    OsMultilabel,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::OsBaseline => "os-baseline",
            Preset::OsAugmentation => "os-augmentation",
            Preset::OsMultilabel => "os-multilabel",
        }
    }

    fn head(self) -> Head {
        match self {
            Preset::OsMultilabel => Head::Multilabel3,
            _ => Head::Binary,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Datasets an experiment reads. Only the ones its preset needs must be set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    pub classification_train: Option<Vec<Comment>>,
    pub span_train: Option<Vec<Comment>>,
    pub span_test: Vec<Comment>,
    pub clean_source: Option<Vec<Comment>>,
    pub stoplist: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn stage<T>(name: impl Into<String>, r: std::result::Result<T, impl Into<Error>>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.into(),
        source: Box::new(e.into()),
    })
}

impl Inputs {
    /// Synthetic splits generated from `config.synth`.
    pub fn synthetic(config: &RunConfig) -> Result<Self> {
        let corpus = stage("synthesize", synth::generate(&config.synth))?;
        Ok(Inputs {
            classification_train: Some(corpus.classification_train),
            span_train: Some(corpus.span_train),
            span_test: corpus.span_test,
            clean_source: Some(corpus.clean_source),
            stoplist: Vec::new(),
        })
    }

    /// Reads the files named in `config.data`, returning their digests too.
    pub fn load(config: &RunConfig, preset: Preset) -> Result<(Self, BTreeMap<String, InputDigest>)> {
        if config.data.synthetic {
            return Ok((Self::synthetic(config)?, BTreeMap::new()));
        }
        let mut digests = BTreeMap::new();
        let mut read =
            |name: &str, path: &Option<PathBuf>, kind: RecordKind, required: bool| -> Result<Option<Vec<Comment>>> {
                let Some(path) = path else {
                    if required {
                        return Err(Error::Config(format!("preset {preset} needs data.{name}")));
                    }
                    return Ok(None);
                };
                let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                digests.insert(
                    name.to_string(),
                    InputDigest {
                        path: path.clone(),
                        sha256: sha256_hex(&bytes),
                    },
                );
                Ok(Some(read_comments(path, kind)?))
            };
        let d = &config.data;
        let augmenting = preset != Preset::OsBaseline;
        let classification_train = read(
            "classification_train",
            &d.classification_train,
            RecordKind::Classification,
            !augmenting,
        )?;
        let span_train = read("span_train", &d.span_train, RecordKind::Span, augmenting)?;
        let span_test = read("span_test", &d.span_test, RecordKind::Span, true)?.expect("required");
        let clean_source = read("clean_source", &d.clean_source, RecordKind::Classification, augmenting)?;
        let stoplist = match &d.stoplist {
            Some(path) => {
                let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                digests.insert(
                    "stoplist".to_string(),
                    InputDigest {
                        path: path.clone(),
                        sha256: sha256_hex(&bytes),
                    },
                );
                read_word_list(path)?
            }
            None => Vec::new(),
        };
        Ok((
            Inputs {
                classification_train,
                span_train,
                span_test,
                clean_source,
                stoplist,
            },
            digests,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub run: u64,
    pub model: u64,
    pub lime: u64,
}

impl RunSeeds {
    pub fn derive(run: u64) -> Self {
        Self {
            run,
            model: run,
            lime: seed::derive(run, "lime", 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub preset: Preset,
    pub config: RunConfig,
    pub runs: Vec<RunSeeds>,
    pub benchmark_seed: u64,
    pub inputs: BTreeMap<String, InputDigest>,
}

impl Manifest {
    pub fn new(preset: Preset, config: &RunConfig, inputs: BTreeMap<String, InputDigest>) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_string(),
            version: 1,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            preset,
            config: config.clone(),
            runs: config.train.seeds.iter().map(|&s| RunSeeds::derive(s)).collect(),
            benchmark_seed: seed::derive(config.seed, "benchmark", 0),
            inputs,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&source).map_err(|e| Error::format(path, e))?;
        if m.format != MANIFEST_FORMAT || m.version != 1 {
            return Err(Error::format(path, "not an offspan manifest"));
        }
        Ok(m)
    }

    /// Fails when any recorded input file no longer has its recorded digest.
    pub fn verify_inputs(&self) -> Result<()> {
        for d in self.inputs.values() {
            let bytes = fs::read(&d.path).map_err(|e| Error::io(&d.path, e))?;
            let found = sha256_hex(&bytes);
            if found != d.sha256 {
                return Err(Error::DigestMismatch {
                    path: d.path.clone(),
                    expected: d.sha256.clone(),
                    found,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub records: Vec<ExplanationRecord>,
    pub predictions: Vec<Comment>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seeds: RunSeeds,
    pub checkpoint: Checkpoint,
    pub methods: BTreeMap<Method, MethodResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub preset: Preset,
    /// Records the preset trained on, as written to `train-data.jsonl`.
    pub train_data: Vec<Comment>,
    pub runs: Vec<RunResult>,
    pub benchmarks: BTreeMap<String, EvalReport>,
}

impl ExperimentResult {
    pub fn summary(&self, method: Method) -> Summary {
        let reports: Vec<EvalReport> = self.runs.iter().map(|r| r.methods[&method].report.clone()).collect();
        Summary::from_reports(&reports)
    }

    pub fn summaries(&self) -> BTreeMap<String, Summary> {
        let mut rows: BTreeMap<String, Summary> = Method::ALL
            .iter()
            .map(|&m| (format!("{}/{m}", self.preset), self.summary(m)))
            .collect();
        for (name, report) in &self.benchmarks {
            rows.insert(
                format!("benchmark/{name}"),
                Summary::from_reports(std::slice::from_ref(report)),
            );
        }
        rows
    }
}

fn echo(config: &RunConfig, method: Method, head: Head, seeds: &RunSeeds) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("method", method.to_string());
    put("head", head.to_string());
    put("model_seed", seeds.model.to_string());
    put("decoder.threshold", config.decoder.threshold.to_string());
    put(
        "decoder.coalesce_adjacent",
        config.decoder.coalesce_adjacent.to_string(),
    );
    if head == Head::Multilabel3 {
        put(
            "decoder.merge_policy",
            format!("{:?}", config.decoder.merge_policy).to_lowercase(),
        );
    }
    match method {
        Method::Lime => {
            put("lime.num_samples", config.lime.num_samples.to_string());
            put("lime.kernel_width", config.lime.kernel_width.to_string());
            put("lime.ridge_lambda", config.lime.ridge_lambda.to_string());
            put("lime.mask_token", config.lime.mask_token.clone());
            put("lime.seed", seeds.lime.to_string());
        }
        Method::Ig => {
            put("ig.steps", config.ig.steps.to_string());
            put("ig.rule", format!("{:?}", config.ig.rule).to_lowercase());
        }
    }
    m
}

/// Runs `preset` on in-memory inputs. Deterministic in its arguments.
pub fn run_experiment(preset: Preset, inputs: &Inputs, config: &RunConfig) -> Result<ExperimentResult> {
    stage("validate-config", config.validate())?;
    let need = |name: &str, v: &Option<Vec<Comment>>| -> Result<Vec<Comment>> {
        v.clone()
            .ok_or_else(|| Error::Config(format!("preset {preset} needs the {name} split")))
    };
    let train_data = match preset {
        Preset::OsBaseline => need("classification_train", &inputs.classification_train)?,
        Preset::OsAugmentation | Preset::OsMultilabel => {
            let span_train = need("span_train", &inputs.span_train)?;
            let clean = need("clean_source", &inputs.clean_source)?;
            let lexicon_config = LexiconConfig {
                stoplist: config
                    .lexicon
                    .stoplist
                    .iter()
                    .cloned()
                    .chain(inputs.stoplist.iter().cloned())
                    .collect(),
                ..config.lexicon.clone()
            };
            let lexicon = stage("build-lexicon", build_lexicon(&span_train, &lexicon_config))?;
            // Clean sources only contribute text.
            let sources: Vec<Comment> = clean.iter().map(|c| Comment::new(c.id(), c.text())).collect();
            let corpus = stage("augment", run_augmentation(&sources, &lexicon, &config.augment))?;
            if preset == Preset::OsMultilabel {
                corpus.multilabel
            } else {
                corpus.classification
            }
        }
    };

    let head = preset.head();
    let mut explain = config.explain_config();
    if head == Head::Multilabel3 && explain.targets == Targets::Auto {
        explain.targets = Targets::All;
    }
    let test = &inputs.span_test;

    let mut runs = Vec::new();
    for &run_seed in &config.train.seeds {
        let seeds = RunSeeds::derive(run_seed);
        let model = offspan_core::ModelConfig {
            head,
            seed: seeds.model,
            ..config.model.clone()
        };
        let ckpt = stage(
            format!("train seed={run_seed}"),
            train(&train_data, &model, &config.train),
        )?;
        let mut methods = BTreeMap::new();
        for method in Method::ALL {
            let mut cfg = explain.clone();
            cfg.lime.seed = seeds.lime;
            let label = format!("{method} seed={run_seed}");
            let records = stage(format!("explain {label}"), explain_dataset(&ckpt, test, method, &cfg))?;
            let predictions = stage(
                format!("extract-spans {label}"),
                decode_records(&records, &config.decoder, Path::new("<memory>")),
            )?;
            let report = stage(format!("evaluate {label}"), evaluate(&predictions, test))?
                .with_config(echo(config, method, head, &seeds));
            methods.insert(
                method,
                MethodResult {
                    records,
                    predictions,
                    report,
                },
            );
        }
        runs.push(RunResult {
            seeds,
            checkpoint: ckpt,
            methods,
        });
    }

    let mut benchmarks = BTreeMap::new();
    let benchmark_seed = seed::derive(config.seed, "benchmark", 0);
    benchmarks.insert(
        "random".to_string(),
        stage("benchmark random", benchmark_random(test, benchmark_seed))?,
    );
    if let Some(span_train) = &inputs.span_train {
        benchmarks.insert(
            "lexicon".to_string(),
            stage("benchmark lexicon", benchmark_lexicon(span_train, test))?,
        );
    }

    Ok(ExperimentResult {
        preset,
        train_data,
        runs,
        benchmarks,
    })
}

/// Writes every artifact of `result` under `out`.
///
/// ```text
/// manifest.json  summary.json  summary.txt  train-data.jsonl
/// benchmarks/{random,lexicon}.json
/// seed-<s>/{lime,ig}/{attributions.jsonl,predictions.jsonl,report.json}
/// seed-<s>/checkpoint.json            (only with `save_checkpoints`)
/// ```
pub fn write_experiment(
    out: &Path,
    manifest: &Manifest,
    result: &ExperimentResult,
    save_checkpoints: bool,
) -> Result<()> {
    write_file(&out.join("manifest.json"), manifest.to_json().as_bytes())?;
    let kind = if result.preset.head() == Head::Multilabel3 {
        RecordKind::Multilabel
    } else {
        RecordKind::Classification
    };
    let train = comments_to_jsonl(&result.train_data, kind).map_err(|m| Error::format(out, m))?;
    write_file(&out.join("train-data.jsonl"), train.as_bytes())?;
    for (name, report) in &result.benchmarks {
        write_file(
            &out.join("benchmarks").join(format!("{name}.json")),
            report_json(report).as_bytes(),
        )?;
    }
    for run in &result.runs {
        let dir = out.join(format!("seed-{}", run.seeds.run));
        if save_checkpoints {
            checkpoint::save(&dir.join("checkpoint.json"), &run.checkpoint)?;
        }
        for (method, r) in &run.methods {
            let mdir = dir.join(method.name());
            write_file(
                &mdir.join("attributions.jsonl"),
                records_to_jsonl(&r.records).as_bytes(),
            )?;
            let preds = comments_to_jsonl(&r.predictions, RecordKind::Span).map_err(|m| Error::format(&mdir, m))?;
            write_file(&mdir.join("predictions.jsonl"), preds.as_bytes())?;
            write_file(&mdir.join("report.json"), report_json(&r.report).as_bytes())?;
        }
    }
    let summaries = result.summaries();
    let mut json = serde_json::to_string_pretty(&summaries).expect("summaries serialize");
    json.push('\n');
    write_file(&out.join("summary.json"), json.as_bytes())?;
    write_file(&out.join("summary.txt"), summary_table(&summaries).as_bytes())?;
    Ok(())
}

/// Loads inputs, runs, and writes outputs. On failure a `FAILED` file naming
/// the stage is left in `out` and the error is returned.
pub fn run_to_dir(manifest: &Manifest, out: &Path, save_checkpoints: bool) -> Result<ExperimentResult> {
    let marker = out.join(FAILED_MARKER);
    let _ = fs::remove_file(&marker);
    let attempt = || -> Result<ExperimentResult> {
        let inputs = if manifest.config.data.synthetic {
            Inputs::synthetic(&manifest.config)?
        } else {
            stage("verify-inputs", manifest.verify_inputs())?;
            stage("load-inputs", Inputs::load(&manifest.config, manifest.preset))?.0
        };
        let result = run_experiment(manifest.preset, &inputs, &manifest.config)?;
        stage(
            "write-outputs",
            write_experiment(out, manifest, &result, save_checkpoints),
        )?;
        Ok(result)
    };
    attempt().inspect_err(|e| {
        let stage = match e {
            Error::Stage { stage, .. } => stage.as_str(),
            _ => "setup",
        };
        let _ = write_file(&marker, format!("stage: {stage}\nerror: {e}\n").as_bytes());
    })
}

/// Default merge policy name, for help text.
pub fn default_merge_policy() -> MergePolicy {
    MergePolicy::default()
}
