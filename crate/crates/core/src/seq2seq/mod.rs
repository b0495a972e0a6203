//! BiLSTM encoder–decoder with additive attention, trained with teacher
//! forcing and decoded greedily.

mod config;
mod model;

pub use config::Seq2SeqConfig;
pub use model::{Annotations, Seq2SeqModel};

use crate::corpus::Seq2SeqExample;
use crate::error::Result;
use crate::numcore::{Grads, ParamStore};
use crate::train::{TokenStats, Trainable};

/// Decoder inputs and gold outputs under teacher forcing: the input at step
/// `t` is gold token `t` (START first), the output is gold token `t + 1`.
pub fn teacher_forcing_pairs(target: &[usize]) -> (&[usize], &[usize]) {
    let target = crate::corpus::trim_pad(target);
    if target.len() < 2 {
        return (&[], &[]);
    }
    (&target[..target.len() - 1], &target[1..])
}

impl Trainable for Seq2SeqModel {
    type Example = Seq2SeqExample;

    fn params(&self) -> &ParamStore {
        Seq2SeqModel::params(self)
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        Seq2SeqModel::params_mut(self)
    }

    fn accumulate(
        &self,
        ex: &Seq2SeqExample,
        _noise_seed: u64,
        grads: &mut Grads,
    ) -> Result<TokenStats> {
        self.example_loss(ex.source(), ex.target(), Some(grads))
    }

    fn evaluate(&self, ex: &Seq2SeqExample) -> Result<TokenStats> {
        self.example_loss(ex.source(), ex.target(), None)
    }

    fn example_id(ex: &Seq2SeqExample) -> &str {
        &ex.id
    }
}
