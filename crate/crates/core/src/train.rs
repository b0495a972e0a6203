//! Mini-batch training shared by both models.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Adam, AdamConfig, Grads, ParamStore};

/// Loss and accuracy tallies over predicted token positions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TokenStats {
    pub loss_sum: f64,
    pub correct: usize,
    pub count: usize,
}

impl TokenStats {
    pub fn merge(&mut self, other: TokenStats) {
        self.loss_sum += other.loss_sum;
        self.correct += other.correct;
        self.count += other.count;
    }

    pub fn mean_loss(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.loss_sum / self.count as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.correct as f64 / self.count as f64
        }
    }
}

/// A model trained with summed per-token cross entropy.
pub trait Trainable: Sync {
    type Example: Sync;

    fn params(&self) -> &ParamStore;

    fn params_mut(&mut self) -> &mut ParamStore;

    /// Add the gradient of the example's summed token loss into `grads`.
    /// `noise_seed` drives any stochastic regularization.
    fn accumulate(
        &self,
        example: &Self::Example,
        noise_seed: u64,
        grads: &mut Grads,
    ) -> Result<TokenStats>;

    /// Deterministic loss and accuracy, no gradients.
    fn evaluate(&self, example: &Self::Example) -> Result<TokenStats>;

    /// Short identifier for diagnostics.
    fn example_id(example: &Self::Example) -> &str;
}

/// Mean loss and token accuracy over one pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub tokens: usize,
}

impl From<TokenStats> for EpochStats {
    fn from(s: TokenStats) -> Self {
        EpochStats {
            mean_loss: s.mean_loss(),
            accuracy: s.accuracy(),
            tokens: s.count,
        }
    }
}

/// Number of fixed gradient partitions per batch. Partials are summed in
/// partition order, so results do not depend on the thread count.
const PARTITIONS: usize = 8;

fn batch_gradient<M: Trainable>(
    model: &M,
    batch: &[&M::Example],
    noise_base: u64,
) -> Result<(Grads, TokenStats)> {
    let chunk = batch.len().div_ceil(PARTITIONS).max(1);
    let partials: Vec<Result<(Grads, TokenStats)>> = batch
        .par_chunks(chunk)
        .enumerate()
        .map(|(ci, part)| {
            let mut grads = model.params().new_grads();
            let mut stats = TokenStats::default();
            for (k, ex) in part.iter().enumerate() {
                let seed = noise_base.wrapping_add((ci * chunk + k) as u64);
                let s = model.accumulate(ex, seed, &mut grads)?;
                if !s.loss_sum.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss of example {}",
                        M::example_id(ex)
                    )));
                }
                stats.merge(s);
            }
            Ok((grads, stats))
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut grads, mut stats) = iter.next().expect("non-empty batch")?;
    for p in iter {
        let (g, s) = p?;
        grads.add(&g);
        stats.merge(s);
    }
    Ok((grads, stats))
}

/// One pass over `examples` in a seeded order. Each batch's gradient is the
/// mean over its predicted tokens, followed by one optimizer step.
pub fn train_epoch<M: Trainable>(
    model: &mut M,
    optimizer: &mut Adam,
    examples: &[M::Example],
    batch_size: usize,
    seed: u64,
) -> Result<EpochStats> {
    if examples.is_empty() {
        return Err(Error::invalid("no training examples"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut order: Vec<&M::Example> = examples.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut total = TokenStats::default();
    for (bi, batch) in order.chunks(batch_size).enumerate() {
        let noise_base = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((bi * batch_size) as u64);
        let (mut grads, stats) =
            batch_gradient(&*model, batch, noise_base).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!("{what} in batch {bi}")),
                other => other,
            })?;
        if stats.count > 0 {
            grads.scale(1.0 / stats.count as f64);
        }
        model.params_mut().set_grads(grads);
        optimizer.step(model.params_mut())?;
        total.merge(stats);
    }
    Ok(total.into())
}

pub fn evaluate<M: Trainable>(model: &M, examples: &[M::Example]) -> Result<EpochStats> {
    let parts: Vec<Result<TokenStats>> = examples.par_iter().map(|ex| model.evaluate(ex)).collect();
    let mut total = TokenStats::default();
    for p in parts {
        total.merge(p?);
    }
    Ok(total.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Stop once validation accuracy has not improved for this many epochs.
    pub patience: Option<usize>,
}

/// One line of the training-history log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

pub fn fit<M: Trainable>(
    model: &mut M,
    train: &[M::Example],
    validation: &[M::Example],
    cfg: &FitConfig,
    mut on_epoch: impl FnMut(&HistoryEntry),
) -> Result<Vec<HistoryEntry>> {
    let mut optimizer = Adam::new(model.params(), cfg.adam);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let seed = cfg.seed.wrapping_add(epoch as u64);
        let stats = train_epoch(model, &mut optimizer, train, cfg.batch_size, seed)?;
        let val_acc = if validation.is_empty() {
            None
        } else {
            Some(evaluate(model, validation)?.accuracy)
        };
        let entry = HistoryEntry {
            epoch,
            train_loss: stats.mean_loss,
            train_acc: stats.accuracy,
            val_acc,
        };
        on_epoch(&entry);
        history.push(entry);
        if let (Some(patience), Some(acc)) = (cfg.patience, val_acc) {
            if acc > best {
                best = acc;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    log::info!("early stop after epoch {epoch}: validation accuracy flat for {patience} epochs");
                    break;
                }
            }
        }
    }
    Ok(history)
}

pub fn write_history<W: Write>(mut out: W, history: &[HistoryEntry]) -> Result<()> {
    for h in history {
        serde_json::to_writer(&mut out, h)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<history>", e))?;
    }
    Ok(())
}
