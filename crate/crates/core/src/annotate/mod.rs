//! Human metricF annotation: a blind item pool built from prediction files,
//! an append-only score store, a terminal session and an HTTP service.

mod server;
mod session;
mod store;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evalmetrics::{
    metricf_aggregate, read_predictions, AnnotationScore, ItemSource, MetricFSummary,
    PredictionRecord,
};

pub use server::{router, serve, ServiceState};
pub use session::{run_session, SessionOutcome, QUESTION};
pub use store::ScoreStore;

/// One (review, candidate title) pair to judge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub item_id: String,
    pub review_text: String,
    pub candidate_title: String,
    pub source: ItemSource,
}

/// What an annotator sees: the item without its source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlindItem<'a> {
    pub item_id: &'a str,
    pub review_text: &'a str,
    pub candidate_title: &'a str,
}

impl AnnotationItem {
    pub fn blind(&self) -> BlindItem<'_> {
        BlindItem {
            item_id: &self.item_id,
            review_text: &self.review_text,
            candidate_title: &self.candidate_title,
        }
    }
}

/// First 16 hex digits of `sha256(source ":" record_id)`.
pub fn item_id(source: ItemSource, record_id: &str) -> String {
    let digest = Sha256::digest(format!("{source}:{record_id}").as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Items from prediction records: one per prediction, plus the original
/// title of each review when `include_original`. Sorted by id; duplicates
/// (same source and record) keep the first occurrence.
pub fn build_items(
    records: &[PredictionRecord],
    include_original: bool,
) -> Result<Vec<AnnotationItem>> {
    let mut items: BTreeMap<String, AnnotationItem> = BTreeMap::new();
    let mut push = |source: ItemSource, r: &PredictionRecord, title: &str| {
        let id = item_id(source, &r.id);
        items.entry(id.clone()).or_insert_with(|| AnnotationItem {
            item_id: id,
            review_text: r.review_text.clone(),
            candidate_title: title.to_string(),
            source,
        });
    };
    for r in records {
        let source: ItemSource = r.model_kind.parse()?;
        push(source, r, &r.predicted_title);
        if include_original {
            push(ItemSource::Original, r, &r.original_title);
        }
    }
    Ok(items.into_values().collect())
}

/// Items from one or more predictions files.
pub fn load_items<P: AsRef<Path>>(
    paths: &[P],
    include_original: bool,
) -> Result<Vec<AnnotationItem>> {
    let mut records = Vec::new();
    for p in paths {
        let (rs, skipped) = read_predictions(p.as_ref())?;
        if skipped > 0 {
            log::warn!(
                "{}: {skipped} malformed lines skipped",
                p.as_ref().display()
            );
        }
        records.extend(rs);
    }
    let items = build_items(&records, include_original)?;
    if items.is_empty() {
        return Err(Error::data("no annotation items in the given predictions"));
    }
    Ok(items)
}

/// `⌈fraction · n⌉` items drawn by a seeded shuffle, kept in pool order.
pub fn sample_items(
    items: &[AnnotationItem],
    fraction: f64,
    seed: u64,
) -> Result<Vec<AnnotationItem>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "sample fraction {fraction} must be in (0, 1]"
        )));
    }
    let k = ((fraction * items.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep = idx[..k.min(items.len())].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| items[i].clone()).collect())
}

/// Coverage per source relative to the item pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    #[serde(flatten)]
    pub summary: MetricFSummary,
    /// At least 6% of the items were judged.
    pub coverage_met: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total_items: usize,
    pub overall: SourceSummary,
    pub sources: BTreeMap<ItemSource, SourceSummary>,
}

pub const COVERAGE_TARGET_PERCENT: f64 = 6.0;

fn with_flag(summary: MetricFSummary) -> SourceSummary {
    SourceSummary {
        coverage_met: summary.coverage_percent >= COVERAGE_TARGET_PERCENT,
        summary,
    }
}

pub fn summarize(items: &[AnnotationItem], scores: &[AnnotationScore]) -> Summary {
    let sources = ItemSource::ALL
        .into_iter()
        .map(|s| {
            let total = items.iter().filter(|i| i.source == s).count();
            (s, with_flag(metricf_aggregate(scores, Some(s), total)))
        })
        .collect();
    Summary {
        total_items: items.len(),
        overall: with_flag(metricf_aggregate(scores, None, items.len())),
        sources,
    }
}
