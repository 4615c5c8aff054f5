// SPDX-License-Identifier: MIT OR Apache-2.0

//! Static HTML with tokens shaded by attribution score.

use std::fmt::Write as _;

use offspan_core::spans::{merge_multilabel, MergePolicy};

use crate::explain::ExplanationRecord;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Red for positive scores, blue for negative, opacity relative to the
/// largest magnitude in the same comment.
fn shade(score: f64, scale: f64) -> String {
    let alpha = if scale > 0.0 {
        (score.abs() / scale).min(1.0)
    } else {
        0.0
    };
    let (r, g, b) = if score >= 0.0 { (220, 38, 38) } else { (37, 99, 235) };
    format!("rgba({r},{g},{b},{alpha:.3})")
}

pub fn render(records: &[ExplanationRecord], title: &str) -> String {
    let mut html = String::new();
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n\
<style>\nbody{{font-family:sans-serif;max-width:60em;margin:2em auto}}\n\
.c{{margin:1em 0;padding:.5em;border-bottom:1px solid #ddd;line-height:2}}\n\
.t{{padding:2px 3px;border-radius:3px}}\n.id{{color:#666;font-size:.8em}}\n</style>\n</head>\n<body>\n<h1>{}</h1>\n",
        escape(title),
        escape(title)
    );
    for record in records {
        let Ok(attributions) = record.to_attributions() else {
            continue;
        };
        let merged = if attributions.len() > 1 {
            merge_multilabel(&attributions, MergePolicy::Max, 0).ok()
        } else {
            attributions.into_iter().next()
        };
        let Some(attribution) = merged else {
            continue;
        };
        let scale = attribution.scores().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let outputs: Vec<String> = record.attributions.iter().map(|o| o.output.to_string()).collect();
        let _ = writeln!(
            html,
            "<div class=\"c\"><div class=\"id\">{} &middot; {} &middot; output {}</div>",
            escape(&record.id),
            record.method,
            outputs.join("+")
        );
        for (token, score) in attribution.iter() {
            let _ = write!(
                html,
                "<span class=\"t\" style=\"background:{}\" title=\"{score:.4}\">{}</span> ",
                shade(score, scale),
                escape(token.text())
            );
        }
        html.push_str("\n</div>\n");
    }
    html.push_str("</body>\n</html>\n");
    html
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{ExplanationRecord, Method, OutputScores};
    use offspan_core::attribution::Diagnostics;
    use offspan_core::text::tokenize;

    #[test]
    fn escapes_and_shades() {
        let text = "<b>bad</b> ok";
        let record = ExplanationRecord {
            id: "x&y".to_string(),
            text: text.to_string(),
            method: Method::Ig,
            tokens: tokenize(text),
            attributions: vec![OutputScores {
                output: 1,
                scores: vec![0.5, -0.25],
                diagnostics: Diagnostics::default(),
            }],
        };
        let html = render(&[record], "run");
        assert!(html.contains("&lt;b&gt;bad&lt;/b&gt;"));
        assert!(html.contains("x&amp;y"));
        assert!(html.contains("rgba(220,38,38,1.000)"));
        assert!(html.contains("rgba(37,99,235,0.500)"));
        assert!(!html.contains("<b>"));
    }
}
