//! The two training framings: seq2seq pairs wrapped in START/END, and the
//! masked-LM step expansion `review [SEP] prefix [MASK]`.

use serde::{Deserialize, Serialize};

use super::clean::{clean_text, tokens};
use super::vocab::{Vocabulary, END, MASK, PAD, SEP, START};
use super::ReviewRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramingConfig {
    pub max_source_len: usize,
    pub max_target_len: usize,
    pub max_context_len: usize,
}

impl Default for FramingConfig {
    fn default() -> Self {
        FramingConfig {
            max_source_len: 60,
            max_target_len: 16,
            max_context_len: 72,
        }
    }
}

/// Why a record produced no examples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Skip {
    EmptyAfterCleaning,
    ContextTooLong,
}

/// A review with both fields cleaned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanRecord {
    pub id: String,
    pub title: String,
    pub text: String,
}

impl CleanRecord {
    pub fn from_review(record: &ReviewRecord) -> Result<Self, Skip> {
        let title = clean_text(&record.title_raw);
        let text = clean_text(&record.text_raw);
        if title.is_empty() || text.is_empty() {
            return Err(Skip::EmptyAfterCleaning);
        }
        Ok(CleanRecord {
            id: record.id.clone(),
            title,
            text,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seq2SeqExample {
    pub id: String,
    pub source_ids: Vec<usize>,
    pub target_ids: Vec<usize>,
}

impl Seq2SeqExample {
    /// Source with trailing PAD removed.
    pub fn source(&self) -> &[usize] {
        trim_pad(&self.source_ids)
    }

    /// Target from START through END.
    pub fn target(&self) -> &[usize] {
        trim_pad(&self.target_ids)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedStepExample {
    pub id: String,
    pub context_ids: Vec<usize>,
    pub mask_position: usize,
    pub target_id: usize,
}

impl MaskedStepExample {
    pub fn context(&self) -> &[usize] {
        trim_pad(&self.context_ids)
    }
}

pub fn trim_pad(ids: &[usize]) -> &[usize] {
    let end = ids.iter().rposition(|&id| id != PAD).map_or(0, |p| p + 1);
    &ids[..end]
}

/// `source` = encoded text (padded to `max_source_len`); `target` =
/// START + title truncated to `max_target_len - 2` + END, padded.
pub fn make_seq2seq_example(
    record: &ReviewRecord,
    vocab: &Vocabulary,
    cfg: &FramingConfig,
) -> Result<Seq2SeqExample, Skip> {
    let clean = CleanRecord::from_review(record)?;
    Ok(seq2seq_from_clean(&clean, vocab, cfg))
}

pub fn seq2seq_from_clean(
    clean: &CleanRecord,
    vocab: &Vocabulary,
    cfg: &FramingConfig,
) -> Seq2SeqExample {
    let source_ids = vocab.encode(&clean.text, cfg.max_source_len, true);
    let body = cfg.max_target_len.saturating_sub(2);
    let mut target_ids = Vec::with_capacity(cfg.max_target_len);
    target_ids.push(START);
    target_ids.extend(vocab.encode(&clean.title, body, false));
    target_ids.push(END);
    target_ids.resize(cfg.max_target_len.max(target_ids.len()), PAD);
    Seq2SeqExample {
        id: clean.id.clone(),
        source_ids,
        target_ids,
    }
}

/// One example per title position plus a terminating SEP example. Records
/// whose longest context would exceed `max_context_len` are dropped whole.
pub fn expand_masked_examples(
    record: &ReviewRecord,
    vocab: &Vocabulary,
    cfg: &FramingConfig,
) -> Result<Vec<MaskedStepExample>, Skip> {
    let clean = CleanRecord::from_review(record)?;
    masked_from_clean(&clean, vocab, cfg)
}

pub fn masked_from_clean(
    clean: &CleanRecord,
    vocab: &Vocabulary,
    cfg: &FramingConfig,
) -> Result<Vec<MaskedStepExample>, Skip> {
    let text: Vec<usize> = tokens(&clean.text).map(|t| vocab.id(t)).collect();
    let title: Vec<usize> = tokens(&clean.title).map(|t| vocab.id(t)).collect();
    // longest context: text + SEP + full title + MASK
    if text.len() + title.len() + 2 > cfg.max_context_len {
        return Err(Skip::ContextTooLong);
    }
    let mut out = Vec::with_capacity(title.len() + 1);
    for k in 0..=title.len() {
        let mut context = Vec::with_capacity(cfg.max_context_len);
        context.extend_from_slice(&text);
        context.push(SEP);
        context.extend_from_slice(&title[..k]);
        let mask_position = context.len();
        context.push(MASK);
        context.resize(cfg.max_context_len, PAD);
        out.push(MaskedStepExample {
            id: clean.id.clone(),
            context_ids: context,
            mask_position,
            target_id: title.get(k).copied().unwrap_or(SEP),
        });
    }
    Ok(out)
}
