//! Small transformer-encoder masked LM and append-`[MASK]` title generation.

mod config;
mod generate;
mod model;

pub use config::TransformerConfig;
pub use generate::{generate_autoregressive, GenerationStep, GenerationTrace, MaskPredictor};
pub use model::MaskedLmModel;

use crate::corpus::MaskedStepExample;
use crate::error::Result;
use crate::numcore::{Grads, ParamStore};
use crate::train::{TokenStats, Trainable};

impl Trainable for MaskedLmModel {
    type Example = MaskedStepExample;

    fn params(&self) -> &ParamStore {
        MaskedLmModel::params(self)
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        MaskedLmModel::params_mut(self)
    }

    fn accumulate(
        &self,
        ex: &MaskedStepExample,
        noise_seed: u64,
        grads: &mut Grads,
    ) -> Result<TokenStats> {
        self.example_loss(
            ex.context(),
            ex.mask_position,
            ex.target_id,
            Some(noise_seed),
            Some(grads),
        )
    }

    fn evaluate(&self, ex: &MaskedStepExample) -> Result<TokenStats> {
        self.example_loss(ex.context(), ex.mask_position, ex.target_id, None, None)
    }

    fn example_id(ex: &MaskedStepExample) -> &str {
        &ex.id
    }
}
