use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub vocab_size: usize,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    /// Applied to the embedding sum and both residual branches while
    /// training.
    pub dropout: f64,
}

impl TransformerConfig {
    /// Two-layer, 64-wide encoder sized for CPU training.
    pub fn desk(vocab_size: usize) -> Self {
        TransformerConfig {
            vocab_size,
            layers: 2,
            hidden: 64,
            heads: 2,
            ffn_dim: 128,
            max_len: 72,
            dropout: 0.1,
        }
    }

    /// BERT-base dimensions. Accepted but far too slow for this trainer.
    pub fn base(vocab_size: usize) -> Self {
        TransformerConfig {
            vocab_size,
            layers: 12,
            hidden: 768,
            heads: 12,
            ffn_dim: 3072,
            max_len: 72,
            dropout: 0.1,
        }
    }

    /// Smallest preset; used by tests and the bundled toy corpora.
    pub fn tiny(vocab_size: usize) -> Self {
        TransformerConfig {
            vocab_size,
            layers: 1,
            hidden: 16,
            heads: 2,
            ffn_dim: 32,
            max_len: 72,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("ffn_dim", self.ffn_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::invalid(format!(
                    "transformer {name} must be positive"
                )));
            }
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if self.max_len < 2 {
            return Err(Error::invalid("max_len must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}
