//! Question vectors and the collection that owns them.

mod hashing;
mod socv;

use std::collections::HashMap;

pub use hashing::{hash_embed, HashEmbedder};
pub use socv::{read_vectors, write_vectors, SOCV_MAGIC, SOCV_VERSION};

use crate::error::{Error, Result};

/// Dimension of the default sentence encoder's output.
pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub question_id: u64,
    pub values: Vec<f32>,
}

/// Something that turns question text into a fixed-width vector.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>>;
}

/// An ordered set of equal-width, nonzero, finite vectors keyed by
/// question id. Rows are stored contiguously.
#[derive(Debug, Clone)]
pub struct VectorCollection {
    dim: usize,
    ids: Vec<u64>,
    data: Vec<f32>,
    index: HashMap<u64, usize>,
}

impl PartialEq for VectorCollection {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.ids == other.ids && self.data == other.data
    }
}

impl VectorCollection {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("vector dimension must be positive"));
        }
        Ok(VectorCollection { dim, ids: Vec::new(), data: Vec::new(), index: HashMap::new() })
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Result<Self> {
        let mut c = Self::new(dim)?;
        c.ids.reserve(capacity);
        c.data.reserve(capacity.saturating_mul(dim));
        c.index.reserve(capacity);
        Ok(c)
    }

    pub fn from_vectors<I>(dim: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = EmbeddingVector>,
    {
        let mut c = Self::new(dim)?;
        for v in vectors {
            c.push(v.question_id, &v.values)?;
        }
        Ok(c)
    }

    /// Appends a vector, rejecting wrong widths, zero or non-finite vectors,
    /// and repeated ids.
    pub fn push(&mut self, question_id: u64, values: &[f32]) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(question_id));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector(question_id));
        }
        if self.index.contains_key(&question_id) {
            return Err(Error::DuplicateId(question_id));
        }
        self.index.insert(question_id, self.ids.len());
        self.ids.push(question_id);
        self.data.extend_from_slice(values);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn id(&self, pos: usize) -> u64 {
        self.ids[pos]
    }

    /// Row `pos`.
    pub fn vector(&self, pos: usize) -> &[f32] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn position(&self, question_id: u64) -> Option<usize> {
        self.index.get(&question_id).copied()
    }

    pub fn get(&self, question_id: u64) -> Option<&[f32]> {
        self.position(question_id).map(|p| self.vector(p))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (u64, &[f32])> + '_ {
        self.ids.iter().copied().zip(self.data.chunks_exact(self.dim))
    }

    pub fn to_vectors(&self) -> Vec<EmbeddingVector> {
        self.iter()
            .map(|(id, v)| EmbeddingVector { question_id: id, values: v.to_vec() })
            .collect()
    }
}

/// Embeds `(id, text)` pairs in order.
pub fn embed_all<'a, E, I>(embedder: &E, texts: I) -> Result<VectorCollection>
where
    E: Embedder + ?Sized,
    I: IntoIterator<Item = (u64, &'a str)>,
{
    let mut out = VectorCollection::new(embedder.dim())?;
    for (id, text) in texts {
        let v = embedder.embed(text)?;
        out.push(id, &v)?;
    }
    Ok(out)
}
