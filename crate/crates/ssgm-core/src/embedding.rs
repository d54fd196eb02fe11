//! Deterministic text embeddings and the drift metric defined on them.
//!
//! Embeddings here are *measurement instruments*, not semantic models: the
//! same text must embed to the same vector on every platform, forever,
//! because drift curves, reconciliation decisions, and golden test values all
//! depend on it. The construction is classic feature hashing:
//!
//! 1. tokenize on Unicode whitespace (no case folding, no stemming);
//! 2. features are word unigrams and adjacent-word bigrams;
//! 3. each feature is hashed with seeded FNV-1a/64; the hash picks a bucket
//!    (`h % dim`) and a sign (high bit), and the sign is accumulated;
//! 4. the bucket vector is L2-normalized in index order.
//!
//! Empty or whitespace-only text embeds to the all-zero vector, and cosine
//! against a zero vector is defined as 0 — both sentinels, documented here
//! and relied on by callers.
//!
//! Drift between two texts is `1 - cosine(embed(a), embed(b))`, clamped to
//! `[0, 2]` to absorb last-ulp rounding spill. Identical texts have drift 0;
//! texts with no shared features have drift exactly 1; anti-correlated
//! vectors approach 2.
//!
//! The hash constants below are frozen. Changing any of them silently
//! changes every persisted embedding-derived measurement, so don't.

use crate::error::{Error, Result};

/// Bucket count used when nothing else is configured.
pub const DEFAULT_DIM: usize = 256;

/// Smallest dimension worth having; below this, collisions swamp the signal.
pub const MIN_DIM: usize = 8;

// Frozen hash constants (FNV-1a 64-bit, plus a domain-separation seed that
// is folded in ahead of the feature bytes).
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const FEATURE_SEED: u64 = 0x5347_4d76_3100_9d2f;

// Feature tags keep unigrams and bigrams in disjoint hash domains.
const TAG_UNIGRAM: u8 = 0x01;
const TAG_BIGRAM: u8 = 0x02;
const BIGRAM_SEP: u8 = 0x1f;

fn fnv1a64(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for byte in seed.to_le_bytes() {
        h = (h ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
    }
    for part in parts {
        for &byte in *part {
            h = (h ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Anything that can turn text into a fixed-width vector. Only the
/// deterministic [`HashEmbedder`] ships; the trait exists so a semantic
/// model can be slotted in by embedders of the library without touching
/// the store or the gates.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// The frozen feature-hashing embedder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: DEFAULT_DIM }
    }
}

impl HashEmbedder {
    /// `dim` must be at least [`MIN_DIM`].
    pub fn new(dim: usize) -> Result<Self> {
        if dim < MIN_DIM {
            return Err(Error::InvalidConfig(format!(
                "embedding dim {dim} below minimum {MIN_DIM}"
            )));
        }
        Ok(HashEmbedder { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0f64; self.dim];
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            return v; // zero-vector sentinel
        }
        for t in &tokens {
            self.bump(&mut v, fnv1a64(FEATURE_SEED, &[&[TAG_UNIGRAM], t.as_bytes()]));
        }
        for pair in tokens.windows(2) {
            let h = fnv1a64(
                FEATURE_SEED,
                &[
                    &[TAG_BIGRAM],
                    pair[0].as_bytes(),
                    &[BIGRAM_SEP],
                    pair[1].as_bytes(),
                ],
            );
            self.bump(&mut v, h);
        }
        l2_normalize(&mut v);
        v
    }

    fn bump(&self, v: &mut [f64], h: u64) {
        let bucket = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[bucket] += sign;
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }
    fn embed(&self, text: &str) -> Vec<f64> {
        HashEmbedder::embed(self, text)
    }
}

/// Normalizes in place, summing squares in index order so the result is
/// bit-identical no matter how the counts were accumulated. A zero vector is
/// left untouched.
fn l2_normalize(v: &mut [f64]) {
    let norm_sq: f64 = v.iter().map(|x| x * x).sum();
    if norm_sq > 0.0 {
        let norm = norm_sq.sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Cosine similarity; 0 by convention when either vector is all-zero.
///
/// Panics if the vectors have different lengths — mixing dimensions is a
/// programming error, not a data condition.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine over mismatched dimensions");
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    if a == b {
        // Bitwise-identical vectors get exactly 1: `dot/(√na·√nb)` can land
        // an ulp off, and downstream "drift is zero after repair" checks
        // deserve exactness, not tolerance.
        return 1.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Semantic drift between two texts under `embedder`: `1 - cosine`, clamped
/// into `[0, 2]`.
pub fn drift_under(embedder: &HashEmbedder, a: &str, b: &str) -> f64 {
    let va = embedder.embed(a);
    let vb = embedder.embed(b);
    (1.0 - cosine(&va, &vb)).clamp(0.0, 2.0)
}

/// [`drift_under`] with the default embedder.
pub fn drift(a: &str, b: &str) -> f64 {
    drift_under(&HashEmbedder::default(), a, b)
}

/// [`HashEmbedder::embed`] with the default embedder.
pub fn embed(text: &str) -> Vec<f64> {
    HashEmbedder::default().embed(text)
}

/// Component-wise mean of a set of vectors (all the same length). Used by the
/// mean-embedding state metric as an alternative to concatenated-text
/// canonicalization. Empty input yields the zero vector of `dim`.
pub fn mean_of(vectors: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; dim];
    if vectors.is_empty() {
        return out;
    }
    for v in vectors {
        assert_eq!(v.len(), dim, "mean over mismatched dimensions");
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    let n = vectors.len() as f64;
    for o in out.iter_mut() {
        *o /= n;
    }
    out
}
