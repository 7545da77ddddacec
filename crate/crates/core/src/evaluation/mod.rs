//! Dataset loading, top-k metrics and the ablation benchmark.

mod benchmark;
pub mod synthetic;

pub use benchmark::{mode_config, run_benchmark, simple_baseline, AblationMode, BenchmarkReport, CaseTrace, VerifierStats};

use crate::ranking::{CaseRecord, RankingError};
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

pub const DEFAULT_KS: [usize; 3] = [1, 3, 5];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dataset line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{predictions} prediction lists for {cases} cases")]
    LengthMismatch { predictions: usize, cases: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ranking(#[from] RankingError),
}

/// Parses JSONL cases; each needs labels and exactly one of text/symptoms.
pub fn parse_dataset(text: &str) -> Result<Vec<CaseRecord>, EvalError> {
    let mut cases = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| EvalError::ParseError { line: n + 1, reason };
        let mut case: CaseRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if case.labels.is_empty() {
            return Err(err("missing labels".into()));
        }
        case.validate().map_err(|e| err(e.to_string()))?;
        if case.id.is_empty() {
            case.id = format!("case{}", n + 1);
        }
        cases.push(case);
    }
    if cases.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    Ok(cases)
}

pub fn load_dataset(path: &Path) -> Result<Vec<CaseRecord>, EvalError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub k: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseHits {
    pub index: usize,
    /// `|top-k ∩ truth|` for each requested k, in order.
    pub hits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cases: usize,
    pub metrics: Vec<KMetrics>,
    pub per_case: Vec<CaseHits>,
}

impl MetricsReport {
    pub fn at(&self, k: usize) -> Option<&KMetrics> {
        self.metrics.iter().find(|m| m.k == k)
    }

    /// Aligned plain-text table, one row per k.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:>5} {:>9} {:>9} {:>9} {:>9}\n", "k", "accuracy", "precision", "recall", "f1");
        for m in &self.metrics {
            let _ = writeln!(
                out,
                "{:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                format!("@{}", m.k),
                m.accuracy,
                m.precision,
                m.recall,
                m.f1
            );
        }
        let _ = writeln!(out, "cases: {}", self.cases);
        out
    }
}

/// Top-k accuracy, precision, recall and F1 for each `k`. Lists shorter
/// than k are scored on what they contain and still divided by k. F1 is
/// taken from the aggregate precision and recall means.
pub fn topk_metrics(predictions: &[Vec<Symbol>], truths: &[Vec<Symbol>], ks: &[usize]) -> Result<MetricsReport, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), cases: truths.len() });
    }
    if truths.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if ks.contains(&0) {
        return Err(EvalError::ZeroK);
    }
    let n = truths.len() as f64;
    let per_case: Vec<CaseHits> = predictions
        .iter()
        .zip(truths)
        .enumerate()
        .map(|(index, (pred, truth))| {
            let truth: BTreeSet<&Symbol> = truth.iter().collect();
            let hits = ks.iter().map(|&k| pred.iter().take(k).filter(|d| truth.contains(d)).count()).collect();
            CaseHits { index, hits }
        })
        .collect();
    let metrics = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let (mut acc, mut prec, mut rec) = (0.0, 0.0, 0.0);
            for (c, truth) in per_case.iter().zip(truths) {
                let h = c.hits[j] as f64;
                acc += if c.hits[j] > 0 { 1.0 } else { 0.0 };
                prec += h / k as f64;
                let distinct = truth.iter().collect::<BTreeSet<_>>().len().max(1);
                rec += h / distinct as f64;
            }
            let (accuracy, precision, recall) = (acc / n, prec / n, rec / n);
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            KMetrics { k, accuracy, precision, recall, f1 }
        })
        .collect();
    Ok(MetricsReport { cases: truths.len(), metrics, per_case })
}
