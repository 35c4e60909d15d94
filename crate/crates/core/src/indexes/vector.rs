//! Cosine nearest-neighbour search: exact scan or random-hyperplane LSH.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{top_k, ScoredHit, Signal};
use crate::config::VectorBackend;
use crate::ids::DeId;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LshParams {
    pub hyperplanes: usize,
    pub tables: usize,
    pub candidate_fraction: f64,
    pub seed: u64,
}

impl From<&crate::config::IndexConfig> for LshParams {
    fn from(c: &crate::config::IndexConfig) -> Self {
        LshParams {
            hyperplanes: c.lsh_hyperplanes,
            tables: c.lsh_tables,
            candidate_fraction: c.lsh_candidate_fraction,
            seed: c.lsh_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Hyperplanes {
    params: LshParams,
    /// (tables·hyperplanes) × dim, row-major.
    normals: Vec<f64>,
    codes: Vec<Vec<u64>>,
}

impl Hyperplanes {
    fn words(&self) -> usize {
        (self.params.tables * self.params.hyperplanes).div_ceil(64)
    }

    fn code(&self, v: &[f64]) -> Vec<u64> {
        let dim = v.len();
        let mut out = vec![0u64; self.words()];
        for (bit, normal) in self.normals.chunks(dim).enumerate() {
            let dot: f64 = normal.iter().zip(v).map(|(a, b)| a * b).sum();
            if dot >= 0.0 {
                out[bit / 64] |= 1 << (bit % 64);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub signal: Signal,
    pub dim: usize,
    pub backend: VectorBackend,
    pub ids: Vec<DeId>,
    pub vectors: Vec<Vec<f64>>,
    lsh: Option<Hyperplanes>,
}

impl VectorIndex {
    /// Zero vectors are left out: they have no direction to compare.
    pub fn build(
        mut entries: Vec<(DeId, Vec<f64>)>,
        dim: usize,
        signal: Signal,
        backend: VectorBackend,
        lsh: &LshParams,
    ) -> Result<Self> {
        entries.retain(|(_, v)| v.iter().any(|x| *x != 0.0));
        entries.sort_by_key(|e| e.0);
        if let Some((_, v)) = entries.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        let (ids, vectors): (Vec<DeId>, Vec<Vec<f64>>) = entries.into_iter().unzip();
        let lsh = match backend {
            VectorBackend::ExactScan => None,
            VectorBackend::RandomHyperplaneLsh => {
                let mut rng = ChaCha8Rng::seed_from_u64(lsh.seed);
                let bits = lsh.tables * lsh.hyperplanes;
                let normals = (0..bits * dim).map(|_| rng.sample(StandardNormal)).collect();
                let mut h = Hyperplanes { params: lsh.clone(), normals, codes: Vec::new() };
                h.codes = vectors.iter().map(|v| h.code(v)).collect();
                Some(h)
            }
        };
        Ok(VectorIndex { signal, dim, backend, ids, vectors, lsh })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, id: DeId) -> Option<&[f64]> {
        self.ids.binary_search(&id).ok().map(|i| self.vectors[i].as_slice())
    }

    pub fn query(&self, q: &[f64], k: usize) -> Result<Vec<ScoredHit>> {
        self.query_filtered(q, k, |_| true)
    }

    pub fn query_filtered(&self, q: &[f64], k: usize, keep: impl Fn(DeId) -> bool) -> Result<Vec<ScoredHit>> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        if q.iter().all(|x| *x == 0.0) {
            return Ok(Vec::new());
        }
        let candidates: Vec<usize> = match &self.lsh {
            None => (0..self.ids.len()).collect(),
            Some(h) => {
                let code = h.code(q);
                let mut ranked: Vec<(u32, usize)> = h
                    .codes
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.iter().zip(&code).map(|(a, b)| (a ^ b).count_ones()).sum(), i))
                    .collect();
                let n = ((h.params.candidate_fraction * ranked.len() as f64).ceil() as usize).max(k).min(ranked.len());
                if n < ranked.len() {
                    ranked.select_nth_unstable(n);
                    ranked.truncate(n);
                }
                let mut c: Vec<usize> = ranked.into_iter().map(|(_, i)| i).collect();
                c.sort_unstable();
                c
            }
        };
        let hits = candidates
            .into_iter()
            .filter(|&i| keep(self.ids[i]))
            .map(|i| ScoredHit { de: self.ids[i], score: cosine(q, &self.vectors[i]), signal: self.signal })
            .collect();
        Ok(top_k(hits, k))
    }
}

/// Cosine similarity; inputs are expected to be unit norm or zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::IndexConfig;
    use crate::ids::DeKind;

    fn id(i: usize) -> DeId {
        DeId::derive(DeKind::Column, "v", &i.to_string())
    }

    fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn build(entries: Vec<(DeId, Vec<f64>)>, dim: usize, backend: VectorBackend) -> VectorIndex {
        VectorIndex::build(entries, dim, Signal::SoloSemantic, backend, &LshParams::from(&IndexConfig::default()))
            .unwrap()
    }

    #[test]
    fn self_query_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let entries: Vec<_> = (0..50).map(|i| (id(i), unit(&mut rng, 16))).collect();
        let q = entries[7].1.clone();
        for backend in [VectorBackend::ExactScan, VectorBackend::RandomHyperplaneLsh] {
            let idx = build(entries.clone(), 16, backend);
            let hits = idx.query(&q, 3).unwrap();
            assert_eq!(hits[0].de, id(7));
            assert!((hits[0].score - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_query_ties_by_id() {
        let entries = vec![(id(0), vec![1.0, 0.0, 0.0]), (id(1), vec![0.0, 1.0, 0.0])];
        let idx = build(entries, 3, VectorBackend::ExactScan);
        let hits = idx.query(&[0.0, 0.0, 1.0], 5).unwrap();
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|h| h.score == 0.0));
        assert!(hits[0].de < hits[1].de);
    }

    #[test]
    fn zero_query_and_dimension_errors() {
        let idx = build(vec![(id(0), vec![1.0, 0.0])], 2, VectorBackend::ExactScan);
        assert!(idx.query(&[0.0, 0.0], 5).unwrap().is_empty());
        assert!(matches!(idx.query(&[1.0], 5), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn lsh_recall_against_exact_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let entries: Vec<_> = (0..1000).map(|i| (id(i), unit(&mut rng, 100))).collect();
        let exact = build(entries.clone(), 100, VectorBackend::ExactScan);
        let approx = build(entries, 100, VectorBackend::RandomHyperplaneLsh);
        let mut found = 0;
        for _ in 0..20 {
            let q = unit(&mut rng, 100);
            let truth: Vec<DeId> = exact.query(&q, 10).unwrap().into_iter().map(|h| h.de).collect();
            let got = approx.query(&q, 10).unwrap();
            found += got.iter().filter(|h| truth.contains(&h.de)).count();
        }
        assert!(found as f64 / 200.0 >= 0.9, "{found}");
    }
}
