use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::clean::tokens;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const START: usize = 2;
pub const END: usize = 3;
pub const SEP: usize = 4;
pub const MASK: usize = 5;

/// Reserved tokens, in id order.
pub const SPECIALS: [&str; 6] = ["<pad>", "<unk>", "<start>", "<end>", "[SEP]", "[MASK]"];
pub const NUM_SPECIALS: usize = SPECIALS.len();

pub fn is_special(id: usize) -> bool {
    id < NUM_SPECIALS
}

/// Word-level vocabulary: specials at ids 0..=5, then corpus tokens by
/// descending frequency (ties lexicographic).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

/// On-disk form: `{"specials": [...], "tokens": [...]}`, where `tokens`
/// lists the non-special entries starting at id 6.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VocabFile {
    pub specials: Vec<String>,
    pub tokens: Vec<String>,
}

impl TryFrom<VocabFile> for Vocabulary {
    type Error = Error;

    fn try_from(file: VocabFile) -> Result<Self> {
        if file.specials != SPECIALS {
            return Err(Error::data(format!(
                "vocabulary specials {:?} differ from {:?}",
                file.specials, SPECIALS
            )));
        }
        Vocabulary::from_tokens(file.tokens)
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile {
            specials: SPECIALS.iter().map(|s| s.to_string()).collect(),
            tokens: v.tokens[NUM_SPECIALS..].to_vec(),
        }
    }
}

impl Vocabulary {
    /// Build from non-special tokens listed in id order.
    pub fn from_tokens(words: Vec<String>) -> Result<Self> {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(words);
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Count whitespace tokens across `texts` and keep the `cap - 6` most
    /// frequent after the specials.
    pub fn build<S: AsRef<str>>(texts: &[S], cap: usize) -> Result<Self> {
        if cap <= NUM_SPECIALS {
            return Err(Error::invalid(format!(
                "vocabulary cap must exceed {NUM_SPECIALS}, got {cap}"
            )));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in texts {
            for tok in tokens(text.as_ref()) {
                if !SPECIALS.contains(&tok) {
                    *counts.entry(tok).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(cap - NUM_SPECIALS);
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Map cleaned text to ids: unknown words become UNK, sequences longer
    /// than `max_len` are truncated, and `pad` right-fills with PAD.
    pub fn encode(&self, cleaned: &str, max_len: usize, pad: bool) -> Vec<usize> {
        let mut ids: Vec<usize> = tokens(cleaned).take(max_len).map(|t| self.id(t)).collect();
        if pad {
            ids.resize(max_len, PAD);
        }
        ids
    }

    /// Render ids back to text, skipping PAD.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&id| id != PAD)
            .map(|&id| self.token(id).unwrap_or(SPECIALS[UNK]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn check_id(&self, id: usize) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                id,
                size: self.len(),
            })
        }
    }
}

/// Free-function form of [`Vocabulary::encode`].
pub fn encode(cleaned: &str, vocab: &Vocabulary, max_len: usize, pad: bool) -> Vec<usize> {
    vocab.encode(cleaned, max_len, pad)
}
