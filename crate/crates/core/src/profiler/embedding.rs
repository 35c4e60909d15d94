//! Word-vector providers and mean-pooled solo embeddings.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::minhash::fnv1a64;
use crate::config::{Pooling, ProfileConfig};
use crate::{Error, Result};

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    /// Adds the word's vector into `acc` scaled by `weight`; false on a miss.
    fn accumulate(&self, word: &str, weight: f64, acc: &mut [f64]) -> bool;
    fn fingerprint(&self) -> String;

    fn lookup(&self, word: &str) -> Option<Vec<f64>> {
        let mut v = vec![0.0; self.dimension()];
        self.accumulate(word, 1.0, &mut v).then_some(v)
    }
}

/// Deterministic Gaussian vector per word, seeded by a hash of the word.
pub struct HashedProvider {
    dim: usize,
    seed: u64,
}

impl HashedProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashedProvider { dim, seed }
    }
}

impl EmbeddingProvider for HashedProvider {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn accumulate(&self, word: &str, weight: f64, acc: &mut [f64]) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(word.as_bytes()) ^ self.seed);
        for x in acc.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *x += weight * g;
        }
        true
    }

    fn fingerprint(&self) -> String {
        format!("hashed:dim={}:seed={:#x}", self.dim, self.seed)
    }
}

/// Vectors loaded from a text file of `word v1 .. vD` lines.
pub struct WordVectorFile {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    digest: String,
}

impl WordVectorFile {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::artifact(path, e))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        let mut vectors = HashMap::new();
        let mut dim = 0;
        for (lineno, line) in bytes.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values: Vec<f32> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::artifact(path, format!("line {}: {e}", lineno + 1)))?;
            // fasttext-style "count dim" header
            if lineno == 0 && values.len() == 1 && word.parse::<usize>().is_ok() {
                continue;
            }
            if dim == 0 {
                dim = values.len();
            }
            if values.len() != dim || dim == 0 {
                return Err(Error::artifact(path, format!("line {}: expected {dim} values", lineno + 1)));
            }
            vectors.insert(word.to_lowercase(), values);
        }
        if vectors.is_empty() {
            return Err(Error::artifact(path, "no vectors"));
        }
        Ok(WordVectorFile { dim, vectors, digest })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for WordVectorFile {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn accumulate(&self, word: &str, weight: f64, acc: &mut [f64]) -> bool {
        match self.vectors.get(word) {
            Some(v) => {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += weight * f64::from(*x);
                }
                true
            }
            None => false,
        }
    }

    fn fingerprint(&self) -> String {
        format!("file:sha256={}", self.digest)
    }
}

/// A unit vector, or the zero vector when nothing could be pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedded {
    pub vec: Vec<f64>,
    pub zero: bool,
}

impl Embedded {
    pub fn zeros(dim: usize) -> Self {
        Embedded { vec: vec![0.0; dim], zero: true }
    }
}

pub struct Embedder {
    provider: Box<dyn EmbeddingProvider>,
    /// Row-major provider_dim × out_dim; None when the dimensions agree.
    projection: Option<Vec<f64>>,
    out_dim: usize,
    pooling: Pooling,
}

impl Embedder {
    pub fn new(provider: Box<dyn EmbeddingProvider>, out_dim: usize, projection_seed: u64, pooling: Pooling) -> Self {
        let d = provider.dimension();
        let projection = (d != out_dim).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(projection_seed);
            let scale = 1.0 / (out_dim as f64).sqrt();
            (0..d * out_dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
        });
        Embedder { provider, projection, out_dim, pooling }
    }

    pub fn from_config(cfg: &ProfileConfig) -> Result<Self> {
        let provider: Box<dyn EmbeddingProvider> = match &cfg.word_vectors {
            Some(path) => Box::new(WordVectorFile::load(path)?),
            None => Box::new(HashedProvider::new(cfg.fallback_dim, cfg.projection_seed ^ 0xa5a5)),
        };
        Ok(Embedder::new(provider, cfg.embedding_dim, cfg.projection_seed, cfg.pooling))
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn fingerprint(&self) -> String {
        self.provider.fingerprint()
    }

    /// Mean-pools `(token, count)` pairs; counts matter only for multiset pooling.
    pub fn embed<'a, I>(&self, tokens: I) -> Embedded
    where
        I: IntoIterator<Item = (&'a str, u32)>,
    {
        let d = self.provider.dimension();
        let mut acc = vec![0.0; d];
        let mut total = 0.0;
        for (token, count) in tokens {
            let w = match self.pooling {
                Pooling::Distinct => 1.0,
                Pooling::Multiset => f64::from(count.max(1)),
            };
            if self.provider.accumulate(token, w, &mut acc) {
                total += w;
            }
        }
        if total == 0.0 {
            return Embedded::zeros(self.out_dim);
        }
        for x in &mut acc {
            *x /= total;
        }
        let projected = match &self.projection {
            None => acc,
            Some(p) => {
                let mut out = vec![0.0; self.out_dim];
                for (row, &x) in acc.iter().enumerate() {
                    let r = &p[row * self.out_dim..(row + 1) * self.out_dim];
                    for (o, w) in out.iter_mut().zip(r) {
                        *o += x * w;
                    }
                }
                out
            }
        };
        normalize(projected)
    }

    pub fn embed_distinct<'a, I>(&self, tokens: I) -> Embedded
    where
        I: IntoIterator<Item = &'a String>,
    {
        self.embed(tokens.into_iter().map(|t| (t.as_str(), 1)))
    }
}

pub fn normalize(mut v: Vec<f64>) -> Embedded {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        let dim = v.len();
        return Embedded::zeros(dim);
    }
    for x in &mut v {
        *x /= norm;
    }
    Embedded { vec: v, zero: false }
}
