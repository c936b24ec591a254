use std::hash::Hasher;

use fnv::FnvHasher;

use super::Embedder;
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

/// Feature-hashing embedder: each lowercase alphanumeric token adds ±1 to
/// one of `dim` buckets, and the counts are L2-normalized.
///
/// Deterministic for a given `(text, dim, seed)`. Only the token multiset
/// matters, not token order.
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Result<Vec<f32>> {
    if dim < 2 {
        return Err(Error::config("hash embedding needs dim >= 2"));
    }
    let lower = text.to_lowercase();
    let mut counts = vec![0i64; dim];
    let mut tokens = 0usize;
    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        let h = token_hash(token, seed);
        let bucket = (h % dim as u64) as usize;
        counts[bucket] += if h >> 63 == 1 { -1 } else { 1 };
        tokens += 1;
    }
    if tokens == 0 {
        return Err(Error::EmptyText);
    }
    let norm = counts.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    if norm == 0.0 {
        // colliding tokens with opposite signs cancelled out
        return Err(Error::ZeroNorm);
    }
    Ok(counts.iter().map(|&c| (c as f64 / norm) as f32).collect())
}

fn token_hash(token: &str, seed: u64) -> u64 {
    let mut hasher = FnvHasher::with_key(FNV_OFFSET ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    hasher.write(token.as_bytes());
    fmix64(hasher.finish())
}

// murmur3 finalizer, spreads FNV's weak low bits
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^ (k >> 33)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::config("hash embedding needs dim >= 2"));
        }
        Ok(HashEmbedder { dim, seed })
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        hash_embed(text, self.dim, self.seed)
    }
}
