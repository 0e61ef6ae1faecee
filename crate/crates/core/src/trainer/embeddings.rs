use crate::error::{Error, Result};
use crate::trainer::Vocab;

/// Dense vectors for every vocabulary unit, stored row-major.
#[derive(Clone, Debug)]
pub struct NgramEmbeddings {
    pub vocab: Vocab,
    dim: usize,
    vectors: Vec<f32>,
}

impl NgramEmbeddings {
    pub fn new(vocab: Vocab, dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if vectors.len() != vocab.len() * dim {
            return Err(Error::DimensionMismatch {
                left: vectors.len(),
                right: vocab.len() * dim,
            });
        }
        if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                matrix: "input",
                row: pos / dim,
                epoch: 0,
                lr: 0.0,
            });
        }
        Ok(NgramEmbeddings { vocab, dim, vectors })
    }

    /// Build from `(unit, vector)` pairs in order.
    pub fn from_pairs<S: Into<String>>(
        dim: usize,
        pairs: impl IntoIterator<Item = (S, Vec<f32>)>,
    ) -> Result<Self> {
        let mut units = Vec::new();
        let mut vectors = Vec::new();
        for (unit, v) in pairs {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: v.len(),
                    right: dim,
                });
            }
            units.push(unit.into());
            vectors.extend(v);
        }
        NgramEmbeddings::new(Vocab::from_units(units)?, dim, vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vector(&self, idx: usize) -> &[f32] {
        &self.vectors[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn get(&self, unit: &str) -> Option<&[f32]> {
        self.vocab.get(unit).map(|i| self.vector(i as usize))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.vectors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vocab
            .units()
            .iter()
            .map(String::as_str)
            .zip(self.vectors.chunks_exact(self.dim))
    }
}
