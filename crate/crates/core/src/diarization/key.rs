//! Binary keys: which KBM Gaussians a stretch of speech activates most.

use crate::audio::MfccSequence;
use crate::diarization::Kbm;
use crate::error::{Error, Result};

/// Fraction of positions set when binarizing a cumulative vector.
pub const BIT_FRACTION: f64 = 0.2;

/// Fixed-length bit vector plus the normalized activation counts it was
/// derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryKey {
    pub bits: Vec<bool>,
    pub cumulative: Vec<f64>,
}

impl BinaryKey {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Build a key from per-frame top-G Gaussian counts: each of the `top_g`
/// best Gaussians per frame receives one count, the counts are normalized to
/// sum one, and the top 20% of positions are set (ties to the lower index).
pub fn binary_key(features: &MfccSequence, kbm: &Kbm, top_g: usize) -> Result<BinaryKey> {
    if features.frames == 0 {
        return Err(Error::EmptyInput("binary_key"));
    }
    let mut counts = vec![0.0f64; kbm.size()];
    for f in 0..features.frames {
        for idx in kbm.top_gaussians(features.frame(f), top_g) {
            counts[idx] += 1.0;
        }
    }
    Ok(key_from_counts(&counts))
}

/// Binarize a non-negative count/cumulative vector.
pub fn key_from_counts(counts: &[f64]) -> BinaryKey {
    let total: f64 = counts.iter().sum();
    let cumulative: Vec<f64> = if total > 0.0 {
        counts.iter().map(|c| c / total).collect()
    } else {
        counts.to_vec()
    };
    let n_bits = ((BIT_FRACTION * counts.len() as f64).ceil() as usize).max(1);
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        cumulative[b]
            .partial_cmp(&cumulative[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut bits = vec![false; counts.len()];
    for &i in order.iter().take(n_bits) {
        bits[i] = true;
    }
    BinaryKey { bits, cumulative }
}

/// Jaccard distance between two keys' bit sets: 1 - |a∧b| / |a∨b|.
pub fn jaccard_distance(a: &BinaryKey, b: &BinaryKey) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            context: "jaccard_distance",
            expected: format!("{}", a.len()),
            actual: format!("{}", b.len()),
        });
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - inter as f64 / union as f64)
}
