//! Metrics, the modality x backend experiment matrix, and report rendering.

mod matrix;
mod report;

pub use matrix::{
    default_matrix, run_experiment_matrix, summarize_seeds, ExperimentResult, MatrixConfig, MatrixEntry, MatrixError, MatrixRun,
    PreparedRecord, SeedSummary,
};
pub use report::{format_metric, render_report, render_seed_summary, ReportFormat};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::BinaryLabel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("{labels} labels but {preds} predictions")]
    LengthMismatch { labels: usize, preds: usize },
    #[error("nothing to evaluate")]
    EmptyEvaluation,
}

/// Positive class is Misinformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
}

pub fn confusion(labels: &[BinaryLabel], preds: &[BinaryLabel]) -> Result<ConfusionCounts, MetricError> {
    if labels.len() != preds.len() {
        return Err(MetricError::LengthMismatch { labels: labels.len(), preds: preds.len() });
    }
    if labels.is_empty() {
        return Err(MetricError::EmptyEvaluation);
    }
    let mut c = ConfusionCounts::default();
    for (l, p) in labels.iter().zip(preds) {
        match (l.is_positive(), p.is_positive()) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Macro average over both classes; any 0/0 ratio counts as 0.
pub fn metrics(c: &ConfusionCounts) -> Result<MetricSet, MetricError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricError::EmptyEvaluation);
    }
    let (p_pos, r_pos) = (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_));
    let (p_neg, r_neg) = (ratio(c.tn, c.tn + c.fn_), ratio(c.tn, c.tn + c.fp));
    Ok(MetricSet {
        accuracy: ratio(c.tp + c.tn, total),
        precision: (p_pos + p_neg) / 2.0,
        recall: (r_pos + r_neg) / 2.0,
        f1: (f1(p_pos, r_pos) + f1(p_neg, r_neg)) / 2.0,
        averaging: Averaging::Macro,
    })
}
