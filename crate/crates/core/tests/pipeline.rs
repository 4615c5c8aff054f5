// SPDX-License-Identifier: MIT OR Apache-2.0

use offspan_core::augment::{build_lexicon, run_augmentation, AugmentConfig, LexiconConfig};
use offspan_core::eval::{benchmark_random, evaluate};
use offspan_core::ig::{explain_ig_outputs, IgConfig};
use offspan_core::model::train;
use offspan_core::spans::{decode_spans, merge_multilabel, MergePolicy, SpanDecoderConfig};
use offspan_core::synth::{generate, SynthConfig};
use offspan_core::{Classifier, Comment, Head, ModelConfig, TrainConfig};

fn corpus() -> offspan_core::synth::SynthCorpus {
    generate(&SynthConfig {
        comments: 900,
        lexicon_size: 80,
        clean_vocabulary: 1000,
        classification_train: 300,
        span_train: 100,
        span_test: 100,
        seed: 9,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn small_model(head: Head) -> ModelConfig {
    ModelConfig {
        vocab_buckets: 4096,
        embed_dim: 32,
        hidden_dim: 32,
        head,
        seed: 1,
        ..ModelConfig::default()
    }
}

#[test]
fn every_positional_head_beats_its_majority_rate() {
    let c = corpus();
    let lexicon = build_lexicon(&c.span_train, &LexiconConfig::default()).unwrap();
    let (fit_src, held_src) = c.clean_source.split_at(300);
    let config = AugmentConfig::default();
    let fit = run_augmentation(fit_src, &lexicon, &config).unwrap().multilabel;
    let held = run_augmentation(held_src, &lexicon, &AugmentConfig { seed: 77, ..config })
        .unwrap()
        .multilabel;
    let train_config = TrainConfig {
        epochs: 20,
        batch_size: 16,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let ckpt = train(&fit, &small_model(Head::Multilabel3), &train_config).unwrap();
    for head in 0..3 {
        let truth: Vec<bool> = held.iter().map(|r| r.position_labels().unwrap().0[head]).collect();
        let positives = truth.iter().filter(|&&t| t).count() as f64;
        let majority = positives.max(truth.len() as f64 - positives) / truth.len() as f64;
        let correct = held
            .iter()
            .zip(&truth)
            .filter(|(r, &t)| (ckpt.predict(r.text()).unwrap()[head] >= 0.5) == t)
            .count() as f64;
        let accuracy = correct / truth.len() as f64;
        assert!(
            accuracy > majority,
            "head {head}: accuracy {accuracy:.3} vs majority {majority:.3}"
        );
    }
}

#[test]
fn ig_spans_from_a_sentence_classifier_beat_random_spans() {
    let c = corpus();
    let train_config = TrainConfig {
        epochs: 20,
        batch_size: 16,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let ckpt = train(&c.classification_train, &small_model(Head::Binary), &train_config).unwrap();
    let decoder = SpanDecoderConfig::default();
    let predictions: Vec<Comment> = c
        .span_test
        .iter()
        .map(|g| {
            let a = explain_ig_outputs(&ckpt, g.text(), &IgConfig::default(), &[1]).unwrap();
            let merged = merge_multilabel(&a, MergePolicy::Max, 0).unwrap();
            Comment::new(g.id(), g.text())
                .with_spans(&decode_spans(&merged, &decoder))
                .unwrap()
        })
        .collect();
    let ig = evaluate(&predictions, &c.span_test).unwrap().mean_f1;
    let random = benchmark_random(&c.span_test, 0).unwrap().mean_f1;
    assert!(ig > random + 0.1, "ig {ig:.3} vs random {random:.3}");
}
