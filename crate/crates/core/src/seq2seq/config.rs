use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub encoder_layers: usize,
    pub encoder_cells: usize,
    pub decoder_layers: usize,
    pub decoder_cells: usize,
    pub max_source_len: usize,
    pub max_target_len: usize,
    pub attention_dim: usize,
}

impl Seq2SeqConfig {
    /// Full-size architecture: 3×32 bidirectional encoder, 2×64 decoder,
    /// 60-token sources.
    pub fn full(vocab_size: usize) -> Self {
        Seq2SeqConfig {
            vocab_size,
            embed_dim: 128,
            encoder_layers: 3,
            encoder_cells: 32,
            decoder_layers: 2,
            decoder_cells: 64,
            max_source_len: 60,
            max_target_len: 16,
            attention_dim: 64,
        }
    }

    /// Half-width variant of [`Seq2SeqConfig::full`] for CPU runs.
    pub fn desk(vocab_size: usize) -> Self {
        Seq2SeqConfig {
            embed_dim: 64,
            encoder_cells: 16,
            decoder_cells: 32,
            attention_dim: 32,
            ..Self::full(vocab_size)
        }
    }

    /// Smallest preset; used by tests and the bundled toy corpora.
    pub fn tiny(vocab_size: usize) -> Self {
        Seq2SeqConfig {
            vocab_size,
            embed_dim: 16,
            encoder_layers: 1,
            encoder_cells: 16,
            decoder_layers: 1,
            decoder_cells: 32,
            max_source_len: 60,
            max_target_len: 16,
            attention_dim: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("encoder_layers", self.encoder_layers),
            ("encoder_cells", self.encoder_cells),
            ("decoder_layers", self.decoder_layers),
            ("decoder_cells", self.decoder_cells),
            ("max_source_len", self.max_source_len),
            ("max_target_len", self.max_target_len),
            ("attention_dim", self.attention_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::invalid(format!("seq2seq {name} must be positive")));
            }
        }
        if self.max_target_len < 2 {
            return Err(Error::invalid(
                "max_target_len must leave room for START and END",
            ));
        }
        Ok(())
    }

    /// Width of one bidirectional annotation.
    pub fn annotation_dim(&self) -> usize {
        2 * self.encoder_cells
    }
}
