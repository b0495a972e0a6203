//! Vector kernels shared by both models. Weights are `[out, in]` row-major.

use super::Tensor;
use crate::error::{Error, Result};

/// `W x`.
pub fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let cols = w.cols();
    debug_assert_eq!(cols, x.len());
    w.data().chunks_exact(cols).map(|row| dot(row, x)).collect()
}

/// `W x + b`.
pub fn affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let mut y = matvec(w, x);
    for (yi, bi) in y.iter_mut().zip(b.data()) {
        *yi += bi;
    }
    y
}

/// `dx += Wᵀ dy`.
pub fn matvec_t_acc(w: &Tensor, dy: &[f64], dx: &mut [f64]) {
    let cols = w.cols();
    debug_assert_eq!(cols, dx.len());
    for (row, &d) in w.data().chunks_exact(cols).zip(dy) {
        if d == 0.0 {
            continue;
        }
        for (a, &r) in dx.iter_mut().zip(row) {
            *a += d * r;
        }
    }
}

/// `Wᵀ dy`.
pub fn matvec_t(w: &Tensor, dy: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; w.cols()];
    matvec_t_acc(w, dy, &mut dx);
    dx
}

/// `G += dy xᵀ`.
pub fn outer_acc(g: &mut Tensor, dy: &[f64], x: &[f64]) {
    let cols = g.cols();
    debug_assert_eq!(cols, x.len());
    for (row, &d) in g.data_mut().chunks_exact_mut(cols).zip(dy) {
        if d == 0.0 {
            continue;
        }
        for (a, &xi) in row.iter_mut().zip(x) {
            *a += d * xi;
        }
    }
}

pub fn add_acc(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Softmax restricted to positions where `allowed[i]` holds; others get
/// exactly zero mass. Returns `None` when nothing is allowed.
pub fn masked_softmax(logits: &[f64], allowed: &[bool]) -> Option<Vec<f64>> {
    let max = logits
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(allowed)
        .map(|(&z, &a)| if a { (z - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    Some(out)
}

/// Sparse categorical cross entropy on one logit vector.
///
/// Returns `-log softmax(logits)[target]` and its gradient
/// `softmax(logits) - onehot(target)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::OutOfRange {
            id: target,
            size: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = log_z - logits[target];
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - log_z).exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Argmax over indices where `allowed(i)` holds.
pub fn argmax_where(v: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if !allowed(i) {
            continue;
        }
        match best {
            Some(b) if v[b] >= x => {}
            _ => best = Some(i),
        }
    }
    best
}
