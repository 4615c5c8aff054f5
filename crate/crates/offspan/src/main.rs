// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use offspan_core::augment::{build_lexicon, positions_from_spans, run_augmentation, Lexicon, LexiconConfig};
use offspan_core::eval::{benchmark_lexicon, benchmark_random, evaluate, EvalReport};
use offspan_core::model::train;
use offspan_core::{seed, synth, Comment, Head};

use offspan::checkpoint;
use offspan::config::RunConfig;
use offspan::dataset::{read_comments, read_word_list, write_comments, write_file, write_word_list, RecordKind};
use offspan::experiment::{run_to_dir, Inputs, Manifest, Preset};
use offspan::explain::{decode_records, explain_dataset, read_records, write_records, Method, Targets};
use offspan::report::{report_json, report_table};
use offspan::{html, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "offspan",
    version,
    about = "Offensive span extraction from sentence-level classifiers"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set lime.num_samples=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchmarkKind {
    Random,
    Lexicon,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus with planted offensive words.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect short gold spans of a span dataset into a word list.
    BuildLexicon {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Plant lexicon words into clean comments.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// Binary-labelled output.
        #[arg(long)]
        output: PathBuf,
        /// Also write positional labels with gold spans.
        #[arg(long)]
        spans_output: Option<PathBuf>,
    },
    /// Derive positional labels from the gold spans of a span dataset.
    MakeMultilabel {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a classifier; the head comes from `model.head` or `--head`.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_parser = parse_head)]
        head: Option<Head>,
    },
    /// Token attributions for every comment of a dataset.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// `auto`, `all`, or an output index.
        #[arg(long)]
        target: Option<Targets>,
        #[arg(long)]
        html: Option<PathBuf>,
    },
    /// Threshold attributions into predicted spans.
    ExtractSpans {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Character F1 of predicted spans against gold spans.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a reference predictor on a span dataset.
    Benchmark {
        #[arg(long, value_enum)]
        kind: BenchmarkKind,
        #[arg(long)]
        gold: PathBuf,
        /// Span dataset supplying the vocabulary for `lexicon`.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a preset end to end over every seed in `train.seeds`.
    Run {
        #[arg(long, value_enum, required_unless_present = "manifest")]
        preset: Option<Preset>,
        #[arg(long)]
        out: PathBuf,
        /// Repeat a previous run from its manifest, ignoring `--config`.
        #[arg(long, conflicts_with = "preset")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        save_checkpoints: bool,
    },
}

fn parse_head(s: &str) -> std::result::Result<Head, String> {
    match s {
        "binary" => Ok(Head::Binary),
        "multilabel3" => Ok(Head::Multilabel3),
        _ => Err(format!("expected `binary` or `multilabel3`, found {s:?}")),
    }
}

fn data_kind(head: Head) -> RecordKind {
    match head {
        Head::Binary => RecordKind::Classification,
        Head::Multilabel3 => RecordKind::Multilabel,
    }
}

fn lexicon_config(config: &RunConfig) -> Result<LexiconConfig> {
    let mut lexicon = config.lexicon.clone();
    if let Some(path) = &config.data.stoplist {
        lexicon.stoplist.extend(read_word_list(path)?);
    }
    Ok(lexicon)
}

fn emit_report(report: &EvalReport, name: &str, output: Option<&Path>) -> Result<()> {
    if let Some(path) = output {
        write_file(path, report_json(report).as_bytes())?;
    }
    print!("{}", report_table(name, report));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = || RunConfig::load(cli.config.as_deref(), &cli.overrides);
    match cli.command {
        Command::Synth { out } => {
            let config = config()?;
            let corpus = synth::generate(&config.synth)?;
            write_comments(
                &out.join("classification_train.jsonl"),
                &corpus.classification_train,
                RecordKind::Classification,
            )?;
            write_comments(&out.join("span_train.jsonl"), &corpus.span_train, RecordKind::Span)?;
            write_comments(&out.join("span_test.jsonl"), &corpus.span_test, RecordKind::Span)?;
            write_comments(
                &out.join("clean_source.jsonl"),
                &corpus.clean_source,
                RecordKind::Classification,
            )?;
            write_word_list(&out.join("planted_words.txt"), &corpus.lexicon)?;
        }
        Command::BuildLexicon { input, output } => {
            let config = config()?;
            let spans = read_comments(&input, RecordKind::Span)?;
            let lexicon = build_lexicon(&spans, &lexicon_config(&config)?)?;
            write_word_list(&output, lexicon.words())?;
            eprintln!("{} words", lexicon.len());
        }
        Command::Augment {
            input,
            lexicon,
            output,
            spans_output,
        } => {
            let config = config()?;
            let source = read_comments(&input, RecordKind::Classification)?;
            let source: Vec<Comment> = source.iter().map(|c| Comment::new(c.id(), c.text())).collect();
            let lexicon = Lexicon::new(read_word_list(&lexicon)?)?;
            let corpus = run_augmentation(&source, &lexicon, &config.augment)?;
            write_comments(&output, &corpus.classification, RecordKind::Classification)?;
            if let Some(path) = spans_output {
                write_comments(&path, &corpus.multilabel, RecordKind::Multilabel)?;
            }
        }
        Command::MakeMultilabel { input, output } => {
            let spans = read_comments(&input, RecordKind::Span)?;
            let labelled: Vec<Comment> = spans
                .into_iter()
                .map(|c| {
                    let labels = positions_from_spans(c.text(), c.spans_or_empty());
                    c.with_positions(labels)
                })
                .collect();
            write_comments(&output, &labelled, RecordKind::Multilabel)?;
        }
        Command::Train { input, output, head } => {
            let config = config()?;
            let model = offspan_core::ModelConfig {
                head: head.unwrap_or(config.model.head),
                ..config.model.clone()
            };
            let data = read_comments(&input, data_kind(model.head))?;
            let ckpt = train(&data, &model, &config.train)?;
            checkpoint::save(&output, &ckpt)?;
            let meta = ckpt.meta();
            eprintln!(
                "best epoch {} of {}, selection loss {:.4}",
                meta.best_epoch, meta.epochs_run, meta.best_selection_loss
            );
        }
        Command::Explain {
            checkpoint: ckpt_path,
            input,
            output,
            method,
            target,
            html: html_path,
        } => {
            let config = config()?;
            let ckpt = checkpoint::load(&ckpt_path)?;
            let comments = read_comments(&input, RecordKind::Span)?;
            let mut explain = config.explain_config();
            if let Some(t) = target {
                explain.targets = t;
            }
            let records = explain_dataset(&ckpt, &comments, method, &explain)?;
            write_records(&output, &records)?;
            if let Some(path) = html_path {
                let title = format!("{method} attributions: {}", input.display());
                write_file(&path, html::render(&records, &title).as_bytes())?;
            }
        }
        Command::ExtractSpans { input, output } => {
            let config = config()?;
            let records = read_records(&input)?;
            let predictions = decode_records(&records, &config.decoder, &input)?;
            write_comments(&output, &predictions, RecordKind::Span)?;
        }
        Command::Evaluate {
            predictions,
            gold,
            output,
        } => {
            let preds = read_comments(&predictions, RecordKind::Span)?;
            let gold = read_comments(&gold, RecordKind::Span)?;
            let report = evaluate(&preds, &gold)?;
            emit_report(&report, "predictions", output.as_deref())?;
        }
        Command::Benchmark {
            kind,
            gold,
            train,
            output,
        } => {
            let config = config()?;
            let gold = read_comments(&gold, RecordKind::Span)?;
            let (name, report) = match kind {
                BenchmarkKind::Random => (
                    "random",
                    benchmark_random(&gold, seed::derive(config.seed, "benchmark", 0))?,
                ),
                BenchmarkKind::Lexicon => {
                    let train =
                        train.ok_or_else(|| Error::Config("the lexicon benchmark needs --train".to_string()))?;
                    (
                        "lexicon",
                        benchmark_lexicon(&read_comments(&train, RecordKind::Span)?, &gold)?,
                    )
                }
            };
            emit_report(&report, name, output.as_deref())?;
        }
        Command::Run {
            preset,
            out,
            manifest,
            save_checkpoints,
        } => {
            let manifest = match manifest {
                Some(path) => Manifest::load(&path)?,
                None => {
                    let config = config()?;
                    let preset = preset.expect("clap requires a preset without a manifest");
                    let (_, digests) = Inputs::load(&config, preset)?;
                    Manifest::new(preset, &config, digests)
                }
            };
            let result = run_to_dir(&manifest, &out, save_checkpoints)?;
            print!("{}", offspan::report::summary_table(&result.summaries()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
