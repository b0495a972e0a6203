use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{descriptive_stats, min_max_normalize, Descriptive};
use super::words::{creativity_stats, CreativityStats};
use super::{bleu, meteor, nist, InfoTable, PredictionRecord};
use crate::corpus::clean::tokens;
use crate::corpus::is_punctuation_token;
use crate::error::{Error, Result};

/// One metric over every row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub scores: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub cv_percent: Option<f64>,
    /// Mean after min-max normalizing this metric's scores.
    pub normalized_mean: f64,
}

impl MetricSummary {
    fn from_scores(scores: Vec<f64>) -> Result<Self> {
        let d = descriptive_stats(&scores)?;
        let norm = min_max_normalize(&scores);
        let normalized_mean = norm.iter().sum::<f64>() / norm.len() as f64;
        Ok(MetricSummary {
            scores,
            mean: d.mean,
            sd: d.sd,
            cv_percent: d.cv_percent,
            normalized_mean,
        })
    }
}

/// Words per title, original against predicted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub original: Descriptive,
    pub predicted: Descriptive,
    /// `mean ± sd %CV: x` lines in table layout.
    pub original_display: String,
    pub predicted_display: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: usize,
    pub skipped_lines: usize,
    pub model_kinds: Vec<String>,
    pub bleu: MetricSummary,
    pub nist: MetricSummary,
    pub meteor: MetricSummary,
    pub creativity: CreativityStats,
    pub lengths: LengthStats,
}

/// Table-2 style block plus creativity, without the n-gram metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub rows: usize,
    pub lengths: LengthStats,
    pub creativity: CreativityStats,
}

/// Number of words in a cleaned sentence, punctuation excluded.
pub fn sentence_length(cleaned: &str) -> usize {
    tokens(cleaned).filter(|t| !is_punctuation_token(t)).count()
}

pub fn length_stats(records: &[PredictionRecord]) -> Result<LengthStats> {
    let orig: Vec<f64> = records
        .iter()
        .map(|r| sentence_length(&r.original_title) as f64)
        .collect();
    let pred: Vec<f64> = records
        .iter()
        .map(|r| sentence_length(&r.predicted_title) as f64)
        .collect();
    let original = descriptive_stats(&orig)?;
    let predicted = descriptive_stats(&pred)?;
    Ok(LengthStats {
        original_display: original.to_string(),
        predicted_display: predicted.to_string(),
        original,
        predicted,
    })
}

pub fn stats_report(records: &[PredictionRecord]) -> Result<StatsReport> {
    if records.is_empty() {
        return Err(Error::data("no prediction records"));
    }
    Ok(StatsReport {
        rows: records.len(),
        lengths: length_stats(records)?,
        creativity: creativity_stats(records),
    })
}

/// Per-row BLEU, NIST and METEOR against the original title. The NIST
/// information table is built from all original titles in `records`.
pub fn evaluate_records(records: &[PredictionRecord]) -> Result<MetricReport> {
    if records.is_empty() {
        return Err(Error::data("no prediction records to evaluate"));
    }
    let refs: Vec<Vec<&str>> = records
        .iter()
        .map(|r| tokens(&r.original_title).collect())
        .collect();
    let table = InfoTable::from_references(&refs);
    let rows: Vec<(f64, f64, f64)> = records
        .par_iter()
        .zip(&refs)
        .map(|(r, reference)| {
            let hyp: Vec<&str> = tokens(&r.predicted_title).collect();
            (
                bleu(&hyp, reference),
                nist(&hyp, reference, &table),
                meteor(&hyp, reference),
            )
        })
        .collect();
    let mut kinds: Vec<String> = records.iter().map(|r| r.model_kind.clone()).collect();
    kinds.sort();
    kinds.dedup();
    Ok(MetricReport {
        rows: records.len(),
        skipped_lines: 0,
        model_kinds: kinds,
        bleu: MetricSummary::from_scores(rows.iter().map(|r| r.0).collect())?,
        nist: MetricSummary::from_scores(rows.iter().map(|r| r.1).collect())?,
        meteor: MetricSummary::from_scores(rows.iter().map(|r| r.2).collect())?,
        creativity: creativity_stats(records),
        lengths: length_stats(records)?,
    })
}

/// Read prediction lines, skipping (and counting) malformed ones.
pub fn read_predictions(path: &Path) -> Result<(Vec<PredictionRecord>, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PredictionRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!(
                    "{}:{}: skipping malformed prediction: {e}",
                    path.display(),
                    i + 1
                );
                skipped += 1;
            }
        }
    }
    Ok((records, skipped))
}

pub fn evaluate_file(path: &Path) -> Result<MetricReport> {
    let (records, skipped) = read_predictions(path)?;
    if records.is_empty() {
        return Err(Error::data(format!(
            "{}: no valid prediction lines ({skipped} malformed)",
            path.display()
        )));
    }
    let mut report = evaluate_records(&records)?;
    report.skipped_lines = skipped;
    Ok(report)
}
