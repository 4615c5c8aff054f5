// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Prints one `PASS` or `FAIL` line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 5`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use offspan::config::RunConfig;
use offspan::experiment::{run_experiment, run_to_dir, Inputs, Manifest, Preset};
use offspan::explain::Method;
use offspan_core::augment::{build_lexicon, positions_from_spans, run_augmentation, AugmentConfig, LexiconConfig};
use offspan_core::eval::{benchmark_random, char_f1};
use offspan_core::ig::{explain_ig, IgConfig};
use offspan_core::lime::{explain_lime_outputs, LimeConfig};
use offspan_core::model::{encode, train};
use offspan_core::synth::{self, SynthConfig};
use offspan_core::text::{char_slice, tokenize, BinaryLabel};
use offspan_core::{seed, CharRange, Checkpoint, Classifier, Comment, Head, ModelConfig, TrainConfig};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// 1. IG completeness

/// A small trained model: even indices train a binary head on sentence
/// labels, odd ones a positional head on augmented clean comments.
fn desk_model(index: u64) -> (Checkpoint, Vec<Comment>) {
    let corpus = synth::generate(&SynthConfig {
        comments: 600,
        lexicon_size: 60,
        clean_vocabulary: 800,
        classification_train: 300,
        span_train: 100,
        span_test: 50,
        seed: index,
        ..SynthConfig::default()
    })
    .unwrap();
    let model = ModelConfig {
        vocab_buckets: 4096,
        embed_dim: 32,
        hidden_dim: 32,
        seed: index,
        ..ModelConfig::default()
    };
    let train_config = TrainConfig {
        epochs: 15,
        batch_size: 16,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let ckpt = if index.is_multiple_of(2) {
        train(&corpus.classification_train, &model, &train_config).unwrap()
    } else {
        let lexicon = build_lexicon(&corpus.span_train, &LexiconConfig::default()).unwrap();
        let augmented = run_augmentation(&corpus.clean_source, &lexicon, &AugmentConfig::default()).unwrap();
        let model = ModelConfig {
            head: Head::Multilabel3,
            ..model
        };
        train(&augmented.multilabel, &model, &train_config).unwrap()
    };
    (ckpt, corpus.span_test)
}

fn residual(ckpt: &Checkpoint, text: &str, steps: usize) -> f64 {
    let a = explain_ig(
        ckpt,
        text,
        &IgConfig {
            steps,
            ..IgConfig::default()
        },
    )
    .unwrap();
    a.diagnostics().completeness_residual.unwrap().abs()
}

fn ig_completeness() -> Verdict {
    let start = Instant::now();
    let (mut cases, mut improved) = (0usize, 0usize);
    let mut at_50 = Vec::new();
    for index in 0..20 {
        let (ckpt, comments) = desk_model(index);
        for c in &comments {
            let (r5, r50, r500) = (
                residual(&ckpt, c.text(), 5),
                residual(&ckpt, c.text(), 50),
                residual(&ckpt, c.text(), 500),
            );
            cases += 1;
            improved += usize::from(r500 < r5);
            at_50.push(r50);
        }
    }
    let med = median(&mut at_50);
    let rate = improved as f64 / cases as f64;
    let elapsed = start.elapsed();
    verdict(
        rate >= 0.95 && med < 0.05 && elapsed < Duration::from_secs(300) && cases >= 20 * 50,
        format!(
            "20 models x 50 comments: m=500 beats m=5 in {improved}/{cases} ({:.1}%), median residual at m=50 {med:.2e}, {}",
            100.0 * rate,
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Input-gradient finite differences

fn gradient_check() -> Verdict {
    let start = Instant::now();
    let eps = 1e-5;
    let mut rng = seed::rng(2);
    let mut worst = 0.0f64;
    for pair in 0..100u64 {
        let head = if rng.gen_bool(0.5) {
            Head::Binary
        } else {
            Head::Multilabel3
        };
        let config = ModelConfig {
            vocab_buckets: rng.gen_range(20..400),
            embed_dim: rng.gen_range(2..=16),
            hidden_dim: rng.gen_range(2..=16),
            head,
            max_seq_length: 40,
            seed: pair,
        };
        let ckpt = Checkpoint::glorot(config.clone()).unwrap();
        let n = rng.gen_range(1..=20);
        let words: Vec<String> = (0..n).map(|_| format!("w{}", rng.gen_range(0..1000))).collect();
        let seq = encode(&words.join(" "), &config);
        let mut x = ckpt.embed(&seq).unwrap();
        // Move off the embedding table so every cell is exercised.
        for v in x.as_mut_slice() {
            *v += rng.gen_range(-0.5..0.5);
        }
        let output = rng.gen_range(0..head.outputs());
        let g = ckpt.input_gradient(&x, output).unwrap();
        let mut diff = 0.0;
        let mut norm_g = 0.0;
        let mut norm_fd = 0.0;
        for cell in 0..x.as_slice().len() {
            let mut plus = x.clone();
            plus.as_mut_slice()[cell] += eps;
            let mut minus = x.clone();
            minus.as_mut_slice()[cell] -= eps;
            let fd = (ckpt.forward_from_embeddings(&plus).unwrap()[output]
                - ckpt.forward_from_embeddings(&minus).unwrap()[output])
                / (2.0 * eps);
            let a = g.as_slice()[cell];
            diff += (a - fd) * (a - fd);
            norm_g += a * a;
            norm_fd += fd * fd;
        }
        let rel = diff.sqrt() / norm_g.sqrt().max(norm_fd.sqrt()).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("100 pairs, worst relative error {worst:.2e}, {}", secs(elapsed)),
    )
}

// ---------------------------------------------------------------------------
// 3. LIME recovers exact linear scorers

/// `b + Σ w_i [token i kept]` on the offensive output.
struct LinearScorer {
    tokens: Vec<String>,
    weights: Vec<f64>,
    intercept: f64,
}

impl Classifier for LinearScorer {
    fn head(&self) -> Head {
        Head::Binary
    }

    fn predict(&self, text: &str) -> offspan_core::Result<Vec<f64>> {
        let seen = tokenize(text);
        assert_eq!(seen.len(), self.tokens.len());
        let p = self.intercept
            + seen
                .iter()
                .zip(&self.tokens)
                .zip(&self.weights)
                .filter(|((s, t), _)| s.text() == t.as_str())
                .map(|(_, w)| w)
                .sum::<f64>();
        Ok(vec![1.0 - p, p])
    }
}

fn lime_recovery() -> Verdict {
    let start = Instant::now();
    let mut rng = seed::rng(3);
    let mut exact = 0;
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let n = rng.gen_range(5..=20);
        let scorer = LinearScorer {
            tokens: (0..n).map(|i| format!("tok{i}")).collect(),
            weights: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            intercept: rng.gen_range(-0.5..0.5),
        };
        let text = scorer.tokens.join(" ");
        let config = LimeConfig {
            num_samples: 10 * n,
            ridge_lambda: 0.0,
            seed: trial,
            ..LimeConfig::default()
        };
        let err = match explain_lime_outputs(&scorer, &text, &config, &[1]) {
            Ok(a) => a[0]
                .scores()
                .iter()
                .zip(&scorer.weights)
                .map(|(s, w)| (s - w).abs())
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
        exact += usize::from(err <= 1e-6);
    }
    let elapsed = start.elapsed();
    verdict(
        exact == 100 && elapsed < Duration::from_secs(60),
        format!(
            "{exact}/100 trials within 1e-6, worst error {worst:.2e}, {}",
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. char_f1 against a brute-force oracle

fn oracle_f1(pred: &[CharRange], gold: &[CharRange]) -> f64 {
    let set = |spans: &[CharRange]| -> BTreeSet<usize> { spans.iter().flat_map(|r| r.start()..r.end()).collect() };
    let (p, g) = (set(pred), set(gold));
    match (p.is_empty(), g.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        // Harmonic mean of tp/|P| and tp/|G|.
        (false, false) => 2.0 * p.intersection(&g).count() as f64 / (p.len() + g.len()) as f64,
    }
}

fn r(s: usize, e: usize) -> CharRange {
    CharRange::new(s, e).unwrap()
}

fn char_f1_oracle() -> Verdict {
    let mut rng = seed::rng(4);
    let mut mismatches = 0;
    let mut max_gap = 0.0f64;
    for _ in 0..10_000 {
        let len = rng.gen_range(1..=80);
        let spans = |rng: &mut seed::Rng| -> Vec<CharRange> {
            (0..rng.gen_range(0..=4))
                .map(|_| {
                    let s = rng.gen_range(0..len);
                    r(s, rng.gen_range(s + 1..=len))
                })
                .collect()
        };
        let (p, g) = (spans(&mut rng), spans(&mut rng));
        let (a, b) = (char_f1(&p, &g), oracle_f1(&p, &g));
        max_gap = max_gap.max((a - b).abs());
        mismatches += usize::from(a != b);
    }
    let hand = [
        (char_f1(&[r(0, 10)], &[r(0, 10)]), 1.0),
        (char_f1(&[r(0, 5)], &[r(5, 10)]), 0.0),
        (char_f1(&[r(0, 10)], &[r(0, 5)]), 2.0 / 3.0),
    ];
    let hand_ok = hand[0].0 == 1.0
        && hand[1].0 == 0.0
        && (hand[2].0 - 0.6667).abs() < 5e-5
        && (hand[2].0 - hand[2].1).abs() < 1e-12;
    verdict(
        mismatches == 0 && hand_ok,
        format!(
            "10000 configurations, {mismatches} mismatches (largest gap {max_gap:.1e}); hand cases {:?}",
            hand.map(|h| h.0)
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Random benchmark on fully offensive comments

fn random_benchmark() -> Verdict {
    let mut rng = seed::rng(5);
    let gold: Vec<Comment> = (0..200)
        .map(|i| {
            let words = rng.gen_range(2..=20);
            let text: Vec<String> = (0..words).map(|_| format!("w{}", rng.gen_range(0..100_000))).collect();
            let c = Comment::new(format!("c{i}"), text.join(" "));
            let len = c.char_len();
            c.with_spans(&[r(0, len)]).unwrap()
        })
        .collect();
    let means: Vec<f64> = (0..1000).map(|s| benchmark_random(&gold, s).unwrap().mean_f1).collect();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    verdict(
        (mean - 2.0 / 3.0).abs() <= 0.02,
        format!("mean F1 over 1000 seeds {mean:.4} (target 0.6667 +/- 0.02)"),
    )
}

// ---------------------------------------------------------------------------
// 6. Augmentation counts and fidelity

fn augmentation() -> Verdict {
    let corpus = synth::generate(&SynthConfig {
        comments: 200,
        classification_train: 100,
        span_train: 50,
        span_test: 20,
        seed: 6,
        ..SynthConfig::default()
    })
    .unwrap();
    let lexicon = build_lexicon(&corpus.span_train, &LexiconConfig::default()).unwrap();
    let sources = &corpus.clean_source[..10];
    let out = run_augmentation(sources, &lexicon, &AugmentConfig::default()).unwrap();
    let records = out.classification.len();
    let offensive = out
        .classification
        .iter()
        .filter(|c| c.binary_label() == Some(BinaryLabel::Offensive))
        .count();
    let mut bad_spans = 0;
    let mut bad_labels = 0;
    let mut spans_seen = 0;
    for c in &out.multilabel {
        for &span in c.spans_or_empty() {
            spans_seen += 1;
            let word = char_slice(c.text(), span).unwrap();
            bad_spans += usize::from(!lexicon.contains(word));
        }
        bad_labels += usize::from(c.position_labels() != Some(positions_from_spans(c.text(), c.spans_or_empty())));
    }
    let paired = out.classification.iter().zip(&out.multilabel).all(|(a, b)| {
        a.id() == b.id()
            && a.text() == b.text()
            && (a.binary_label() == Some(BinaryLabel::Offensive)) == !b.spans_or_empty().is_empty()
    });
    verdict(
        records == 40 && offensive == 30 && bad_spans == 0 && bad_labels == 0 && paired && out.multilabel.len() == 40,
        format!(
            "{records} records, {offensive} offensive; {spans_seen} spans, {bad_spans} outside the lexicon; {bad_labels} label mismatches"
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Directional replication on the planted-token corpus

fn directional() -> Verdict {
    let start = Instant::now();
    let config = RunConfig {
        data: offspan::config::DataPaths {
            synthetic: true,
            ..Default::default()
        },
        ..RunConfig::default()
    };
    assert_eq!(config.synth.comments, 2000);
    assert_eq!(config.synth.lexicon_size, 200);
    assert_eq!(config.train.seeds.len(), 5);
    let inputs = Inputs::synthetic(&config).unwrap();
    let mut f1 = BTreeMap::new();
    let mut random = 0.0;
    for preset in [Preset::OsBaseline, Preset::OsAugmentation, Preset::OsMultilabel] {
        let result = run_experiment(preset, &inputs, &config).unwrap();
        random = result.benchmarks["random"].mean_f1;
        for method in Method::ALL {
            f1.insert((preset, method), result.summary(method).mean_f1);
        }
    }
    let elapsed = start.elapsed();
    let get = |p, m| f1[&(p, m)];
    let a = f1.values().all(|&v| v >= random + 0.10);
    let b = get(Preset::OsMultilabel, Method::Lime) > get(Preset::OsBaseline, Method::Lime);
    let c = get(Preset::OsBaseline, Method::Ig) > get(Preset::OsBaseline, Method::Lime);
    let mut detail = format!("random {random:.4};");
    for ((p, m), v) in &f1 {
        let _ = write!(detail, " {p}/{m} {v:.4};");
    }
    let mark = |ok: bool| if ok { "pass" } else { "fail" };
    let _ = write!(
        detail,
        " (a) {} (b) {} (c) {}; {}",
        mark(a),
        mark(b),
        mark(c),
        secs(elapsed)
    );
    verdict(a && b && c && elapsed < Duration::from_secs(30 * 60), detail)
}

// ---------------------------------------------------------------------------
// 8. Determinism

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn offspan(args: &[&str], cwd: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_offspan"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "offspan {args:?}: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}

const SMALL: &str = "\
[synth]
comments = 400
lexicon_size = 60
clean_vocabulary = 600
classification_train = 200
span_train = 60
span_test = 40

[model]
vocab_buckets = 2048
embed_dim = 16
hidden_dim = 16

[train]
epochs = 4
batch_size = 16
seeds = [11, 12]

[lime]
num_samples = 200

[ig]
steps = 20
";

/// Every CLI stage, run into `dir` from the config at `config`.
fn stage_pass(dir: &Path, config: &Path) {
    let c = config.to_str().unwrap();
    let steps: [&[&str]; 13] = [
        &["synth", "--config", c, "--out", "data"],
        &[
            "build-lexicon",
            "--config",
            c,
            "--input",
            "data/span_train.jsonl",
            "--output",
            "lexicon.txt",
        ],
        &[
            "augment",
            "--config",
            c,
            "--input",
            "data/clean_source.jsonl",
            "--lexicon",
            "lexicon.txt",
            "--output",
            "aug.jsonl",
            "--spans-output",
            "aug-ml.jsonl",
        ],
        &[
            "make-multilabel",
            "--input",
            "data/span_train.jsonl",
            "--output",
            "span-ml.jsonl",
        ],
        &[
            "train",
            "--config",
            c,
            "--input",
            "aug-ml.jsonl",
            "--head",
            "multilabel3",
            "--output",
            "ml.ckpt.json",
        ],
        &[
            "train",
            "--config",
            c,
            "--input",
            "data/classification_train.jsonl",
            "--output",
            "bin.ckpt.json",
        ],
        &[
            "explain",
            "--config",
            c,
            "--checkpoint",
            "ml.ckpt.json",
            "--input",
            "data/span_test.jsonl",
            "--method",
            "lime",
            "--target",
            "all",
            "--output",
            "ml-lime.jsonl",
            "--html",
            "ml-lime.html",
        ],
        &[
            "explain",
            "--config",
            c,
            "--checkpoint",
            "bin.ckpt.json",
            "--input",
            "data/span_test.jsonl",
            "--method",
            "ig",
            "--output",
            "bin-ig.jsonl",
        ],
        &[
            "extract-spans",
            "--config",
            c,
            "--input",
            "ml-lime.jsonl",
            "--output",
            "ml-lime-pred.jsonl",
        ],
        &[
            "extract-spans",
            "--config",
            c,
            "--input",
            "bin-ig.jsonl",
            "--output",
            "bin-ig-pred.jsonl",
        ],
        &[
            "evaluate",
            "--predictions",
            "bin-ig-pred.jsonl",
            "--gold",
            "data/span_test.jsonl",
            "--output",
            "bin-ig-report.json",
        ],
        &[
            "benchmark",
            "--config",
            c,
            "--kind",
            "random",
            "--gold",
            "data/span_test.jsonl",
            "--output",
            "random.json",
        ],
        &[
            "benchmark",
            "--kind",
            "lexicon",
            "--gold",
            "data/span_test.jsonl",
            "--train",
            "data/span_train.jsonl",
            "--output",
            "lexicon.json",
        ],
    ];
    fs::create_dir_all(dir).unwrap();
    for args in steps {
        offspan(args, dir);
    }
}

fn determinism() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let root = root.path();
    let config_path = root.join("small.toml");
    fs::write(&config_path, SMALL).unwrap();

    // Stage by stage through the CLI, twice.
    stage_pass(&root.join("stages-a"), &config_path);
    stage_pass(&root.join("stages-b"), &config_path);
    let (a, b) = (tree(&root.join("stages-a")), tree(&root.join("stages-b")));
    let stages_same = a == b;

    // Whole presets from file inputs, then again from the saved manifest.
    let data = root.join("stages-a/data");
    let mut config = RunConfig::load(Some(&config_path), &[]).unwrap();
    config.data.classification_train = Some(data.join("classification_train.jsonl"));
    config.data.span_train = Some(data.join("span_train.jsonl"));
    config.data.span_test = Some(data.join("span_test.jsonl"));
    config.data.clean_source = Some(data.join("clean_source.jsonl"));
    let mut runs_same = true;
    let mut files = a.len();
    for preset in [Preset::OsBaseline, Preset::OsMultilabel] {
        let (_, digests) = Inputs::load(&config, preset).unwrap();
        let manifest = Manifest::new(preset, &config, digests);
        let first = root.join(format!("{preset}-first"));
        run_to_dir(&manifest, &first, true).unwrap();
        let reloaded = Manifest::load(&first.join("manifest.json")).unwrap();
        let second = root.join(format!("{preset}-second"));
        run_to_dir(&reloaded, &second, true).unwrap();
        // And through the CLI from the manifest file.
        let third = root.join(format!("{preset}-cli"));
        offspan(
            &[
                "run",
                "--manifest",
                first.join("manifest.json").to_str().unwrap(),
                "--out",
                third.to_str().unwrap(),
                "--save-checkpoints",
            ],
            root,
        );
        let (t1, t2, t3) = (tree(&first), tree(&second), tree(&third));
        files += t1.len();
        runs_same &= t1 == t2 && t1 == t3 && t1.len() > 10;
    }

    // A synthetic run is reproducible in memory as well.
    let synthetic = RunConfig {
        data: offspan::config::DataPaths {
            synthetic: true,
            ..Default::default()
        },
        ..config.clone()
    };
    let inputs = Inputs::synthetic(&synthetic).unwrap();
    let memory_same = run_experiment(Preset::OsAugmentation, &inputs, &synthetic).unwrap()
        == run_experiment(Preset::OsAugmentation, &inputs, &synthetic).unwrap();

    verdict(
        stages_same && runs_same && memory_same,
        format!(
            "13 CLI stages rerun: {}; preset reruns from manifest: {}; in-memory rerun: {}; {files} files compared",
            if stages_same { "identical" } else { "DIFFER" },
            if runs_same { "identical" } else { "DIFFER" },
            if memory_same { "identical" } else { "DIFFER" },
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    type Criterion = (&'static str, &'static str, fn() -> Verdict);
    let criteria: [Criterion; 8] = [
        ("1", "IG completeness", ig_completeness),
        ("2", "gradient correctness", gradient_check),
        ("3", "LIME linear recovery", lime_recovery),
        ("4", "char_f1 oracle equivalence", char_f1_oracle),
        ("5", "random benchmark expectation", random_benchmark),
        ("6", "augmentation counts and fidelity", augmentation),
        ("7", "directional replication", directional),
        ("8", "determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let v = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "criterion {id} {}: {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
