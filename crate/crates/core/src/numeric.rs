//! Pure numeric primitives: cosine similarity, pooling, softmax.

use crate::error::{AidError, Result};
use crate::types::{EmbeddingVector, FrameSequence};

/// Cosine of the angle between two embeddings.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine_slices(a.values(), b.values())
}

pub(crate) fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(AidError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(AidError::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Round through f32 so the on-disk feature store reproduces the value exactly.
pub(crate) fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

/// Component-wise mean over the frames of a sequence.
///
/// Uses the running-mean update `m += (x - m) / n`, so a sequence of
/// identical frames pools to that frame bit-for-bit.
pub fn mean_pool(frames: &FrameSequence) -> Result<EmbeddingVector> {
    if frames.is_empty() {
        return Err(AidError::Empty("frame sequence"));
    }
    let mut mean = frames.row(0).to_vec();
    for t in 1..frames.len() {
        let n = (t + 1) as f64;
        for (m, x) in mean.iter_mut().zip(frames.row(t)) {
            *m += (x - *m) / n;
        }
    }
    EmbeddingVector::new(mean)
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(AidError::Empty("logits"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(AidError::NonFinite("logits"));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Unchecked softmax for hot loops; input must be finite and nonempty.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Log-softmax, stable for large logits.
pub(crate) fn log_softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    for v in row.iter_mut() {
        *v -= lse;
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
