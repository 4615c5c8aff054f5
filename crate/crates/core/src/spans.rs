// SPDX-License-Identifier: MIT OR Apache-2.0

//! Turning token scores into predicted character spans.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Diagnostics};
use crate::error::{Error, Result};
use crate::text::CharRange;

/// How attributions for several positional labels become one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergePolicy {
    /// Elementwise maximum: a token flagged by any label survives.
    #[default]
    Max,
    Sum,
    /// Pass one label's attribution through unchanged.
    SingleLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpanDecoderConfig {
    /// Tokens scoring at or above τ are predicted offensive.
    pub threshold: f64,
    pub merge_policy: MergePolicy,
    /// Label passed through by [`MergePolicy::SingleLabel`].
    pub merge_label: usize,
    /// Join runs of consecutive marked tokens, whitespace included.
    pub coalesce_adjacent: bool,
}

impl Default for SpanDecoderConfig {
    fn default() -> Self {
        Self {
            threshold: -0.01,
            merge_policy: MergePolicy::Max,
            merge_label: 0,
            coalesce_adjacent: true,
        }
    }
}

impl SpanDecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::InvalidConfig("threshold must be finite".to_string()));
        }
        Ok(())
    }
}

/// Character ranges of tokens scoring `>= threshold`, sorted and disjoint.
pub fn decode_spans(attribution: &Attribution, config: &SpanDecoderConfig) -> Vec<CharRange> {
    let mut out: Vec<CharRange> = Vec::new();
    let mut previous_marked = false;
    for (tok, score) in attribution.iter() {
        let marked = score >= config.threshold;
        if marked {
            let r = tok.range();
            match out.last_mut() {
                Some(last) if previous_marked && config.coalesce_adjacent => {
                    *last = CharRange::new(last.start(), r.end()).expect("tokens are ordered");
                }
                _ => out.push(r),
            }
        }
        previous_marked = marked;
    }
    out
}

/// Combines per-label attributions over the same tokens.
pub fn merge_multilabel(attributions: &[Attribution], policy: MergePolicy, label: usize) -> Result<Attribution> {
    let first = attributions.first().ok_or(Error::Empty("attributions to merge"))?;
    if attributions.iter().any(|a| a.tokens() != first.tokens()) {
        return Err(Error::TokenMismatch);
    }
    let n = first.tokens().len();
    let outputs: Vec<usize> = attributions.iter().flat_map(|a| a.outputs().iter().copied()).collect();
    let scores = match policy {
        MergePolicy::SingleLabel => {
            let chosen = attributions.get(label).ok_or(Error::OutputIndex {
                index: label,
                outputs: attributions.len(),
            })?;
            return Ok(chosen.clone());
        }
        MergePolicy::Max => {
            let mut s = vec![f64::NEG_INFINITY; n];
            for a in attributions {
                for (m, v) in s.iter_mut().zip(a.scores()) {
                    *m = m.max(*v);
                }
            }
            s
        }
        MergePolicy::Sum => {
            let mut s = vec![0.0; n];
            for a in attributions {
                for (m, v) in s.iter_mut().zip(a.scores()) {
                    *m += v;
                }
            }
            s
        }
    };
    let mut diagnostics = Diagnostics::default();
    for a in attributions {
        diagnostics.warnings.extend(a.diagnostics().warnings.iter().cloned());
    }
    Attribution::new(first.tokens().to_vec(), scores, outputs, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{spans_to_charset, tokenize};
    use alloc::string::String;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn attr(text: &str, scores: &[f64]) -> Attribution {
        Attribution::new(tokenize(text), scores.to_vec(), vec![1], Diagnostics::default()).unwrap()
    }

    fn r(s: usize, e: usize) -> CharRange {
        CharRange::new(s, e).unwrap()
    }

    #[test]
    fn nothing_above_threshold() {
        let a = attr("aa bb cc", &[-0.5, -0.02, -0.011]);
        assert!(decode_spans(&a, &SpanDecoderConfig::default()).is_empty());
    }

    #[test]
    fn gap_token_breaks_adjacency() {
        let a = attr("aa bb cc", &[0.5, -0.5, 0.3]);
        assert_eq!(decode_spans(&a, &SpanDecoderConfig::default()), [r(0, 2), r(6, 8)]);
    }

    #[test]
    fn full_cover_coalesces_to_one_range() {
        let a = attr(" aa  bb cc ", &[0.1, 0.0, -0.01]);
        assert_eq!(decode_spans(&a, &SpanDecoderConfig::default()), [r(1, 10)]);
        let per_token = SpanDecoderConfig {
            coalesce_adjacent: false,
            ..SpanDecoderConfig::default()
        };
        assert_eq!(decode_spans(&a, &per_token), [r(1, 3), r(5, 7), r(8, 10)]);
    }

    #[test]
    fn merge_policies() {
        let text = "x y z";
        let parts = [
            attr(text, &[1.0, 0.0, 0.0]),
            attr(text, &[0.0, 1.0, 0.0]),
            attr(text, &[0.0, 0.0, 1.0]),
        ];
        let max = merge_multilabel(&parts, MergePolicy::Max, 0).unwrap();
        assert_eq!(max.scores(), [1.0, 1.0, 1.0]);
        let sum = merge_multilabel(&parts, MergePolicy::Sum, 0).unwrap();
        assert_eq!(sum.scores(), [1.0, 1.0, 1.0]);
        let single = merge_multilabel(&parts, MergePolicy::SingleLabel, 1).unwrap();
        assert_eq!(single.scores(), [0.0, 1.0, 0.0]);

        let same = [parts[0].clone(), parts[0].clone(), parts[0].clone()];
        assert_eq!(
            merge_multilabel(&same, MergePolicy::Max, 0).unwrap().scores(),
            parts[0].scores()
        );
    }

    #[test]
    fn merge_rejects_token_mismatch() {
        let parts = [attr("x y", &[1.0, 0.0]), attr("x z", &[1.0, 0.0])];
        assert_eq!(merge_multilabel(&parts, MergePolicy::Max, 0), Err(Error::TokenMismatch));
        assert!(merge_multilabel(&[], MergePolicy::Max, 0).is_err());
    }

    fn text_and_scores() -> impl Strategy<Value = (Vec<String>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec("[a-z*]{1,5}", n),
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(-1.0f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn raising_threshold_never_grows_prediction(
            (words, scores, _, _) in text_and_scores(),
            lo in -1.0f64..1.0,
            bump in 0.0f64..1.0,
            coalesce in any::<bool>(),
        ) {
            let text = words.join("  ");
            let a = attr(&text, &scores);
            let cfg = |t| SpanDecoderConfig { threshold: t, coalesce_adjacent: coalesce, ..SpanDecoderConfig::default() };
            let low = spans_to_charset(&decode_spans(&a, &cfg(lo)));
            let high = spans_to_charset(&decode_spans(&a, &cfg(lo + bump)));
            prop_assert!(high.is_subset(&low));
            let spans = decode_spans(&a, &cfg(lo));
            let len = text.chars().count();
            for w in spans.windows(2) {
                prop_assert!(w[0].end() < w[1].start());
            }
            prop_assert!(spans.iter().all(|s| s.end() <= len));
            prop_assert_eq!(decode_spans(&a, &cfg(lo)), spans);
        }

        #[test]
        fn max_merge_dominates_each_label(
            (words, s0, s1, s2) in text_and_scores(),
            t in -0.5f64..0.5,
        ) {
            let text = words.join(" ");
            let parts = [attr(&text, &s0), attr(&text, &s1), attr(&text, &s2)];
            let cfg = SpanDecoderConfig { threshold: t, ..SpanDecoderConfig::default() };
            let merged = merge_multilabel(&parts, MergePolicy::Max, 0).unwrap();
            let all = spans_to_charset(&decode_spans(&merged, &cfg));
            for label in 0..3 {
                let single = merge_multilabel(&parts, MergePolicy::SingleLabel, label).unwrap();
                prop_assert!(spans_to_charset(&decode_spans(&single, &cfg)).is_subset(&all));
            }
        }
    }
}
