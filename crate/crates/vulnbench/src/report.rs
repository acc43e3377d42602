//! Render a benchmark result as markdown, CSV, or JSON.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::round3;
use crate::runner::BenchmarkResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn fmt3(value: f64) -> String {
    format!("{:.3}", round3(value))
}

/// Analyzer ids in first-appearance (config) order.
fn analyzer_order(result: &BenchmarkResult) -> Vec<&str> {
    let mut order: Vec<&str> = Vec::new();
    for record in &result.metrics {
        if !order.contains(&record.analyzer_id.as_str()) {
            order.push(&record.analyzer_id);
        }
    }
    for failure in &result.failures {
        if !order.contains(&failure.analyzer_id.as_str()) {
            order.push(&failure.analyzer_id);
        }
    }
    order
}

fn render_markdown(result: &BenchmarkResult) -> String {
    let mut out = String::from("# Benchmark report\n");

    for analyzer in analyzer_order(result) {
        let _ = writeln!(out, "\n## {analyzer}\n");
        out.push_str("| Project | FP | FN | Precision | Recall | F1 |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        let mut rows: Vec<_> = result
            .metrics
            .iter()
            .filter(|r| r.analyzer_id == analyzer)
            .collect();
        rows.sort_by(|a, b| a.project_id.cmp(&b.project_id));
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                r.project_id,
                r.false_positives,
                r.false_negatives,
                fmt3(r.precision),
                fmt3(r.recall),
                fmt3(r.f1)
            );
        }
        let failed: Vec<_> = result
            .failures
            .iter()
            .filter(|f| f.analyzer_id == analyzer)
            .collect();
        for f in failed {
            let _ = writeln!(out, "| {} | — | — | — | — | — |", f.project_id);
        }
    }

    out.push_str("\n## Averages\n\n");
    out.push_str("| Analyzer | Avg. Precision | Avg. Recall | Avg. F1 | FP ratio |\n");
    out.push_str("|---|---|---|---|---|\n");
    for agg in &result.aggregates {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            agg.analyzer_id,
            fmt3(agg.avg_precision),
            fmt3(agg.avg_recall),
            fmt3(agg.avg_f1),
            fmt3(agg.fp_ratio)
        );
    }

    if !result.timings.is_empty() {
        out.push_str("\n## Timings\n\n");
        out.push_str("| Analyzer | Project | Wall time |\n");
        out.push_str("|---|---|---|\n");
        for analyzer in analyzer_order(result) {
            let mut cells: Vec<_> = result
                .timings
                .iter()
                .filter(|t| t.analyzer_id == analyzer)
                .collect();
            cells.sort_by(|a, b| a.project_id.cmp(&b.project_id));
            for t in cells {
                let suffix = if t.measured { "" } else { " (unmeasured)" };
                let _ = writeln!(
                    out,
                    "| {} | {} | {}s{} |",
                    t.analyzer_id,
                    t.project_id,
                    fmt3(t.seconds),
                    suffix
                );
            }
        }
    }

    if !result.failures.is_empty() {
        out.push_str("\n## Failures\n\n");
        for f in &result.failures {
            let _ = writeln!(out, "- {} / {}: {}", f.analyzer_id, f.project_id, f.error);
        }
    }

    out
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn render_csv(result: &BenchmarkResult) -> String {
    let mut out = String::from("analyzer,project,metric,value\n");
    for analyzer in analyzer_order(result) {
        let mut rows: Vec<_> = result
            .metrics
            .iter()
            .filter(|r| r.analyzer_id == analyzer)
            .collect();
        rows.sort_by(|a, b| a.project_id.cmp(&b.project_id));
        for r in rows {
            let a = csv_escape(analyzer);
            let p = csv_escape(&r.project_id);
            let _ = writeln!(out, "{a},{p},false_positives,{}", r.false_positives);
            let _ = writeln!(out, "{a},{p},false_negatives,{}", r.false_negatives);
            let _ = writeln!(out, "{a},{p},precision,{}", fmt3(r.precision));
            let _ = writeln!(out, "{a},{p},recall,{}", fmt3(r.recall));
            let _ = writeln!(out, "{a},{p},f1,{}", fmt3(r.f1));
        }
        let mut cells: Vec<_> = result
            .timings
            .iter()
            .filter(|t| t.analyzer_id == analyzer)
            .collect();
        cells.sort_by(|a, b| a.project_id.cmp(&b.project_id));
        for t in cells {
            let _ = writeln!(
                out,
                "{},{},wall_time_seconds,{}",
                csv_escape(analyzer),
                csv_escape(&t.project_id),
                fmt3(t.seconds)
            );
        }
    }
    for agg in &result.aggregates {
        let a = csv_escape(&agg.analyzer_id);
        let _ = writeln!(out, "{a},,avg_precision,{}", fmt3(agg.avg_precision));
        let _ = writeln!(out, "{a},,avg_recall,{}", fmt3(agg.avg_recall));
        let _ = writeln!(out, "{a},,avg_f1,{}", fmt3(agg.avg_f1));
        let _ = writeln!(out, "{a},,fp_ratio,{}", fmt3(agg.fp_ratio));
    }
    out
}

/// Deterministic report bytes: analyzer order as configured, projects
/// lexicographic.
pub fn render_report(result: &BenchmarkResult, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Markdown => render_markdown(result).into_bytes(),
        ReportFormat::Csv => render_csv(result).into_bytes(),
        ReportFormat::Json => {
            let mut bytes =
                serde_json::to_vec_pretty(result).expect("result serialization is infallible");
            bytes.push(b'\n');
            bytes
        }
    }
}
