//! Review ingestion and the two training framings.

pub mod clean;
pub mod framing;
mod load;
pub mod split;
pub mod vocab;

use serde::{Deserialize, Serialize};

pub use clean::{clean_text, is_punctuation_token};
pub use framing::{
    expand_masked_examples, make_seq2seq_example, masked_from_clean, seq2seq_from_clean, trim_pad,
    CleanRecord, FramingConfig, MaskedStepExample, Seq2SeqExample, Skip,
};
pub use load::{load_reviews, read_reviews, CsvSchema, LoadReport};
pub use split::{split_corpus, CorpusSplit, SplitRatios};
pub use vocab::{encode, Vocabulary};

/// One raw `(review_title, review_text)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub id: String,
    pub title_raw: String,
    pub text_raw: String,
}
