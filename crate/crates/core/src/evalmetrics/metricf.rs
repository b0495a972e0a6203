use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::stats::descriptive_stats;
use crate::error::{Error, Result};

/// A 3-point human judgment: 0 (bad), 0.5 (partial) or 1 (good).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Score(f64);

impl Score {
    pub const BAD: Score = Score(0.0);
    pub const PARTIAL: Score = Score(0.5);
    pub const GOOD: Score = Score(1.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Terminal keys: `0` → 0, `5` → 0.5, `1` → 1.
    pub fn from_key(key: &str) -> Option<Score> {
        match key.trim() {
            "0" => Some(Score::BAD),
            "5" => Some(Score::PARTIAL),
            "1" => Some(Score::GOOD),
            _ => None,
        }
    }
}

impl TryFrom<f64> for Score {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        if v == 0.0 || v == 0.5 || v == 1.0 {
            Ok(Score(v))
        } else {
            Err(Error::invalid(format!("score {v} is not one of 0, 0.5, 1")))
        }
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

/// Where an annotated title came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemSource {
    Original,
    Bilstm,
    Maskedlm,
}

impl ItemSource {
    pub const ALL: [ItemSource; 3] = [
        ItemSource::Original,
        ItemSource::Bilstm,
        ItemSource::Maskedlm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ItemSource::Original => "original",
            ItemSource::Bilstm => "bilstm",
            ItemSource::Maskedlm => "maskedlm",
        }
    }
}

impl fmt::Display for ItemSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ItemSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(ItemSource::Original),
            "bilstm" | "bilstm_seq2seq" => Ok(ItemSource::Bilstm),
            "maskedlm" | "masked_lm" => Ok(ItemSource::Maskedlm),
            other => Err(Error::invalid(format!("unknown item source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationScore {
    pub item_id: String,
    pub source: ItemSource,
    pub score: Score,
    pub annotator: String,
    pub timestamp: DateTime<Utc>,
}

/// metricF for one source (or all sources).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricFSummary {
    pub count: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub coverage_percent: f64,
}

/// Keeps the latest judgment per `(item, annotator)`, in input order.
pub fn dedup_latest(scores: &[AnnotationScore]) -> Vec<&AnnotationScore> {
    let mut last: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, s) in scores.iter().enumerate() {
        last.insert((&s.item_id, &s.annotator), i);
    }
    let mut keep: Vec<usize> = last.into_values().collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| &scores[i]).collect()
}

/// Mean ± sample sd of the deduplicated scores matching `source` (all when
/// `None`); coverage is relative to `total_items` of that source.
pub fn metricf_aggregate(
    scores: &[AnnotationScore],
    source: Option<ItemSource>,
    total_items: usize,
) -> MetricFSummary {
    let values: Vec<f64> = dedup_latest(scores)
        .into_iter()
        .filter(|s| source.is_none_or(|src| s.source == src))
        .map(|s| s.score.value())
        .collect();
    let stats = descriptive_stats(&values).ok();
    MetricFSummary {
        count: values.len(),
        mean: stats.map(|d| d.mean),
        sd: stats.map(|d| d.sd),
        coverage_percent: if total_items == 0 {
            0.0
        } else {
            100.0 * values.len() as f64 / total_items as f64
        },
    }
}
