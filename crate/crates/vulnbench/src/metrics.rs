//! Precision / recall / F1 per project plus per-analyzer averages and
//! false-positive ratios. All 0/0 cases are defined as 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::RawCounts;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("records mix analyzers: {0} and {1}")]
    MixedAnalyzers(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub analyzer_id: String,
    pub project_id: String,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Full precision; round with [`round3`] for display.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub analyzer_id: String,
    pub avg_precision: f64,
    pub avg_recall: f64,
    pub avg_f1: f64,
    /// Σ FP / Σ total_found by default (pooled).
    pub fp_ratio: f64,
    pub fp_ratio_mode: FpRatioMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpRatioMode {
    Pooled,
    MeanOfRatios,
}

/// Display rounding: half-up to 3 decimals.
pub fn round3(value: f64) -> f64 {
    (value * 1000.0).round() / 1000.0
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// FP, FN, precision, recall, F1 from raw counts.
pub fn compute_metrics(counts: &RawCounts, analyzer_id: &str, project_id: &str) -> MetricsRecord {
    let tp = counts.true_positives;
    let fp = counts.total_found - tp;
    let fn_ = counts.known_vulnerabilities - tp;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricsRecord {
        analyzer_id: analyzer_id.to_string(),
        project_id: project_id.to_string(),
        false_positives: fp,
        false_negatives: fn_,
        precision,
        recall,
        f1,
    }
}

/// Unweighted arithmetic means over projects plus the FP ratio.
pub fn aggregate(
    records: &[MetricsRecord],
    totals: &[RawCounts],
) -> Result<AggregateMetrics, MetricsError> {
    aggregate_with(records, totals, FpRatioMode::Pooled)
}

pub fn aggregate_with(
    records: &[MetricsRecord],
    totals: &[RawCounts],
    mode: FpRatioMode,
) -> Result<AggregateMetrics, MetricsError> {
    let first = records.first().ok_or(MetricsError::EmptyInput)?;
    for record in records {
        if record.analyzer_id != first.analyzer_id {
            return Err(MetricsError::MixedAnalyzers(
                first.analyzer_id.clone(),
                record.analyzer_id.clone(),
            ));
        }
    }

    let n = records.len() as f64;
    let fp_ratio = match mode {
        FpRatioMode::Pooled => {
            let fp_sum: usize = records.iter().map(|r| r.false_positives).sum();
            let total_sum: usize = totals.iter().map(|t| t.total_found).sum();
            ratio(fp_sum, total_sum)
        }
        FpRatioMode::MeanOfRatios => {
            // records and totals are aligned by project; 0-found projects
            // contribute 0 instead of an undefined ratio
            records
                .iter()
                .zip(totals)
                .map(|(r, t)| ratio(r.false_positives, t.total_found))
                .sum::<f64>()
                / n
        }
    };

    Ok(AggregateMetrics {
        analyzer_id: first.analyzer_id.clone(),
        avg_precision: records.iter().map(|r| r.precision).sum::<f64>() / n,
        avg_recall: records.iter().map(|r| r.recall).sum::<f64>() / n,
        avg_f1: records.iter().map(|r| r.f1).sum::<f64>() / n,
        fp_ratio,
        fp_ratio_mode: mode,
    })
}
