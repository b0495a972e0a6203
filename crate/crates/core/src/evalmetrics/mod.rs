//! Sentence-level BLEU, NIST and METEOR, descriptive statistics, creativity
//! measures, metricF aggregation and word frequencies.

mod bleu;
mod meteor;
pub mod metricf;
mod nist;
mod report;
mod stats;
mod words;

use serde::{Deserialize, Serialize};

pub use bleu::bleu;
pub use meteor::{meteor, meteor_alignment};
pub use metricf::{metricf_aggregate, AnnotationScore, ItemSource, MetricFSummary, Score};
pub use nist::{nist, nist_beta, InfoTable, NIST_MAX_N};
pub use report::{
    evaluate_file, evaluate_records, length_stats, read_predictions, sentence_length, stats_report,
    LengthStats, MetricReport, MetricSummary, StatsReport,
};
pub use stats::{cv_percent, descriptive_stats, min_max_normalize, Descriptive};
pub use words::{creativity_stats, word_frequencies, write_frequencies_tsv, CreativityStats};

/// One line of a predictions file. All text fields are cleaned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub review_text: String,
    pub original_title: String,
    pub predicted_title: String,
    pub model_kind: String,
}
