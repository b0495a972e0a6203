//! Autoregressive title generation by repeatedly appending `[MASK]`.

use serde::{Deserialize, Serialize};

use super::MaskedLmModel;
use crate::corpus::trim_pad;
use crate::corpus::vocab::{MASK, SEP};
use crate::error::Result;

/// Anything that can fill a single `[MASK]`.
pub trait MaskPredictor {
    /// Longest context the predictor accepts.
    fn max_len(&self) -> usize;

    fn predict_mask(&self, context: &[usize], mask_position: usize) -> Result<usize>;
}

impl MaskPredictor for MaskedLmModel {
    fn max_len(&self) -> usize {
        self.config().max_len
    }

    fn predict_mask(&self, context: &[usize], mask_position: usize) -> Result<usize> {
        MaskedLmModel::predict_mask(self, context, mask_position)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStep {
    pub context: Vec<usize>,
    pub mask_position: usize,
    pub predicted: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub steps: Vec<GenerationStep>,
    /// Generated title, without the terminating SEP.
    pub output: Vec<usize>,
    /// The review was cut from the right to leave room for `SEP MASK`.
    pub review_truncated: bool,
    /// Generation ended on a predicted SEP rather than a full context.
    pub terminated: bool,
}

/// Builds `review SEP generated MASK`, takes the prediction at the mask and
/// appends it, until SEP is predicted or the context reaches
/// `max_total_len` (capped by the predictor's own limit).
pub fn generate_autoregressive<P: MaskPredictor + ?Sized>(
    predictor: &P,
    review_ids: &[usize],
    max_total_len: usize,
) -> Result<GenerationTrace> {
    let limit = max_total_len.min(predictor.max_len()).max(2);
    let mut review = trim_pad(review_ids).to_vec();
    let review_truncated = review.len() + 2 > limit;
    review.truncate(limit - 2);

    let mut context = review;
    context.push(SEP);
    let mut output = Vec::new();
    let mut steps = Vec::new();
    let mut terminated = false;
    loop {
        let mask_position = context.len();
        context.push(MASK);
        let predicted = predictor.predict_mask(&context, mask_position)?;
        steps.push(GenerationStep {
            context: context.clone(),
            mask_position,
            predicted,
        });
        if predicted == SEP {
            terminated = true;
            break;
        }
        context[mask_position] = predicted;
        output.push(predicted);
        if context.len() >= limit {
            break;
        }
    }
    Ok(GenerationTrace {
        steps,
        output,
        review_truncated,
        terminated,
    })
}
