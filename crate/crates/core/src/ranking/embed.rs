use super::RankingError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_DIM: usize = 256;

/// A unit-length dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseVector(Vec<f64>);

impl CaseVector {
    /// Scales `values` to unit L2 norm; `None` for the zero vector.
    pub fn normalized(mut values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Some(Self(values))
    }

    /// Keeps `values` unchanged when already unit length within 1e-9,
    /// otherwise normalises.
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() <= 1e-9 {
            Some(Self(values))
        } else {
            Self::normalized(values)
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Dot product, which is the cosine for unit vectors.
    pub fn cosine(&self, other: &CaseVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Maps one case item (a symptom atom) to a dense vector.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_item(&self, item: &str) -> Vec<f64>;
}

/// Signed feature hashing. An atom contributes itself and, when it has
/// several `_`-separated parts, each part; every token adds ±1 to one
/// bucket chosen by SHA-256.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl HashingEmbedder {
    fn add_token(&self, token: &str, out: &mut [f64]) {
        let digest = Sha256::digest(token.as_bytes());
        let h = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let bucket = (h % self.dim as u64) as usize;
        out[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_item(&self, item: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_token(item, &mut out);
        let parts: Vec<&str> = item.split('_').filter(|p| !p.is_empty()).collect();
        if parts.len() > 1 {
            for p in parts {
                self.add_token(p, &mut out);
            }
        }
        out
    }
}

/// Mean of the per-item unit vectors, L2-normalised.
pub fn embed_case(items: &[&str], embedder: &dyn Embedder) -> Result<CaseVector, RankingError> {
    if items.is_empty() {
        return Err(RankingError::EmptyCase);
    }
    let mut sum = vec![0.0; embedder.dim()];
    for item in items {
        let v = CaseVector::normalized(embedder.embed_item(item)).ok_or(RankingError::EmptyCase)?;
        sum.iter_mut().zip(v.values()).for_each(|(s, x)| *s += x);
    }
    let n = items.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    CaseVector::normalized(sum).ok_or(RankingError::EmptyCase)
}
