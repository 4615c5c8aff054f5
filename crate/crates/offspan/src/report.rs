// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation reports as JSON and as aligned text tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use offspan_core::eval::{Bucket, EvalReport};
use serde::{Deserialize, Serialize};

pub fn report_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

/// One report as a single-row table of F1 percentages.
pub fn report_table(name: &str, report: &EvalReport) -> String {
    let mut rows = BTreeMap::new();
    rows.insert(name.to_string(), Summary::from_reports(std::slice::from_ref(report)));
    summary_table(&rows)
}

/// Mean F1 and bucket means averaged over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub mean_f1: f64,
    /// Per-run mean F1, in run order.
    pub per_run: Vec<f64>,
    pub buckets: BTreeMap<Bucket, Option<f64>>,
}

impl Summary {
    pub fn from_reports(reports: &[EvalReport]) -> Self {
        let per_run: Vec<f64> = reports.iter().map(|r| r.mean_f1).collect();
        let n = per_run.len().max(1) as f64;
        let buckets = Bucket::ALL
            .iter()
            .map(|&b| {
                let vals: Vec<f64> = reports.iter().filter_map(|r| r.bucket(b)).collect();
                let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
                (b, mean)
            })
            .collect();
        Self {
            runs: reports.len(),
            mean_f1: per_run.iter().sum::<f64>() / n,
            per_run,
            buckets,
        }
    }
}

/// Rows of `name  F1  F1@<30  F1@30-50  F1@>50`, values in percent.
pub fn summary_table(rows: &BTreeMap<String, Summary>) -> String {
    let width = rows.keys().map(String::len).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}  {:>7}", "method", "F1");
    for b in Bucket::ALL {
        let _ = write!(out, "  {:>9}", format!("F1@{}", b.label()));
    }
    out.push('\n');
    for (name, s) in rows {
        let _ = write!(out, "{name:<width$}  {:>7}", pct(Some(s.mean_f1)));
        for b in Bucket::ALL {
            let _ = write!(out, "  {:>9}", pct(s.buckets.get(&b).copied().flatten()));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use offspan_core::eval::CommentScore;

    fn report(scores: &[(usize, f64)]) -> EvalReport {
        EvalReport::from_scores(
            scores
                .iter()
                .enumerate()
                .map(|(i, &(chars, f1))| CommentScore {
                    id: i.to_string(),
                    chars,
                    f1,
                })
                .collect(),
        )
    }

    #[test]
    fn summary_averages_runs() {
        let a = report(&[(10, 1.0), (40, 0.5)]);
        let b = report(&[(10, 0.0), (40, 0.5)]);
        let s = Summary::from_reports(&[a, b]);
        assert_eq!(s.runs, 2);
        assert_eq!(s.per_run, [0.75, 0.25]);
        assert_eq!(s.mean_f1, 0.5);
        assert_eq!(s.buckets[&Bucket::Short], Some(0.5));
        assert_eq!(s.buckets[&Bucket::Long], None);
    }

    #[test]
    fn table_layout() {
        let t = report_table("ig", &report(&[(10, 1.0), (60, 0.5)]));
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "method       F1     F1@<30   F1@30-50     F1@>50");
        assert_eq!(lines[1], "ig        75.00     100.00          -      50.00");
        let json = report_json(&report(&[(10, 1.0)]));
        assert!(json.contains("\"<30\": 1.0"));
        assert!(json.contains("\"30-50\": null"));
    }
}
