//! Cardinality-partitioned LSH index for set containment search.

use serde::{Deserialize, Serialize};

use super::{top_k, ScoredHit, Signal};
use crate::ids::DeId;
use crate::profiler::minhash::{estimate_containment, splitmix64, MinhashSignature};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContainmentMode {
    TopK(usize),
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentParams {
    pub partition_ratio: f64,
    pub collision_target: f64,
    pub band_rows: Vec<usize>,
}

impl From<&crate::config::IndexConfig> for ContainmentParams {
    fn from(c: &crate::config::IndexConfig) -> Self {
        ContainmentParams {
            partition_ratio: c.partition_ratio,
            collision_target: c.collision_target,
            band_rows: c.band_rows.clone(),
        }
    }
}

/// Band tables at one rows-per-band setting: `bands[b]` is sorted by key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Level {
    rows: usize,
    bands: Vec<Vec<(u32, u32)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub bucket: i32,
    pub min_card: usize,
    pub max_card: usize,
    pub members: Vec<u32>,
    levels: Vec<Level>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentIndex {
    pub num_hashes: usize,
    pub seed: u64,
    pub params: ContainmentParams,
    pub ids: Vec<DeId>,
    pub signatures: Vec<MinhashSignature>,
    pub partitions: Vec<Partition>,
}

fn band_key(slice: &[u64]) -> u32 {
    let mut k = 0x51_7cc1_b727_220a_u64;
    for &h in slice {
        k = splitmix64(k ^ h);
    }
    (k >> 32) as u32
}

pub fn partition_bucket(card: usize, ratio: f64) -> i32 {
    ((card.max(1) as f64).ln() / ratio.ln()).floor() as i32
}

/// Probability that a pair at Jaccard `s` collides in at least one band.
pub fn collision_probability(s: f64, rows: usize, bands: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

impl ContainmentIndex {
    pub fn build(mut entries: Vec<(DeId, MinhashSignature)>, params: ContainmentParams) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        let (num_hashes, seed) = match entries.first() {
            Some((_, s)) => (s.num_hashes(), s.seed),
            None => (0, 0),
        };
        if let Some((_, first)) = entries.first() {
            for (_, s) in &entries {
                first.check_compatible(s)?;
            }
        }
        let mut rows: Vec<usize> = params.band_rows.iter().copied().filter(|&r| r >= 1 && r <= num_hashes).collect();
        rows.sort_unstable();
        rows.dedup();
        if rows.is_empty() && num_hashes > 0 {
            rows.push(1);
        }

        let mut by_bucket: std::collections::BTreeMap<i32, Vec<u32>> = Default::default();
        for (i, (_, s)) in entries.iter().enumerate() {
            by_bucket.entry(partition_bucket(s.set_cardinality, params.partition_ratio)).or_default().push(i as u32);
        }
        let partitions = by_bucket
            .into_iter()
            .map(|(bucket, members)| {
                let cards = members.iter().map(|&m| entries[m as usize].1.set_cardinality);
                let min_card = cards.clone().min().unwrap_or(0);
                let max_card = cards.max().unwrap_or(0);
                let levels = rows
                    .iter()
                    .map(|&r| {
                        let n_bands = num_hashes / r;
                        let bands = (0..n_bands)
                            .map(|b| {
                                let mut table: Vec<(u32, u32)> = members
                                    .iter()
                                    .map(|&m| (band_key(&entries[m as usize].1.hashes[b * r..(b + 1) * r]), m))
                                    .collect();
                                table.sort_unstable();
                                table
                            })
                            .collect();
                        Level { rows: r, bands }
                    })
                    .collect();
                Partition { bucket, min_card, max_card, members, levels }
            })
            .collect();
        let (ids, signatures) = entries.into_iter().unzip();
        Ok(ContainmentIndex { num_hashes, seed, params, ids, signatures, partitions })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn signature(&self, id: DeId) -> Option<&MinhashSignature> {
        self.ids.binary_search(&id).ok().map(|i| &self.signatures[i])
    }

    /// Rows-per-band for a partition so that a set at containment `t`
    /// collides with probability at least the configured target.
    fn rows_for(&self, part: &Partition, q: usize, t: f64) -> usize {
        let u = part.max_card as f64;
        let q = q as f64;
        let s = (t * q / (q + u - t * q)).clamp(0.0, 1.0);
        part.levels
            .iter()
            .rev()
            .find(|l| collision_probability(s, l.rows, self.num_hashes / l.rows) >= self.params.collision_target)
            .or(part.levels.first())
            .map_or(1, |l| l.rows)
    }

    fn candidates(&self, query: &MinhashSignature, mode: ContainmentMode) -> Vec<u32> {
        let mut out = Vec::new();
        for part in &self.partitions {
            let rows = match mode {
                ContainmentMode::TopK(_) => part.levels.first().map_or(1, |l| l.rows),
                ContainmentMode::Threshold(t) => self.rows_for(part, query.set_cardinality, t),
            };
            let Some(level) = part.levels.iter().find(|l| l.rows == rows) else { continue };
            for (b, table) in level.bands.iter().enumerate() {
                let key = band_key(&query.hashes[b * rows..(b + 1) * rows]);
                let start = table.partition_point(|&(k, _)| k < key);
                out.extend(table[start..].iter().take_while(|&&(k, _)| k == key).map(|&(_, m)| m));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn query(&self, query: &MinhashSignature, mode: ContainmentMode) -> Result<Vec<ScoredHit>> {
        self.query_filtered(query, mode, |_| true)
    }

    pub fn query_filtered(
        &self,
        query: &MinhashSignature,
        mode: ContainmentMode,
        keep: impl Fn(DeId) -> bool,
    ) -> Result<Vec<ScoredHit>> {
        if self.is_empty() {
            return Ok(Vec::new());
        }
        query.check_compatible(&self.signatures[0])?;
        let mut hits = Vec::new();
        for m in self.candidates(query, mode) {
            let id = self.ids[m as usize];
            if !keep(id) {
                continue;
            }
            let score = estimate_containment(query, &self.signatures[m as usize])?;
            if score > 0.0 {
                hits.push(ScoredHit { de: id, score, signal: Signal::Containment });
            }
        }
        Ok(match mode {
            ContainmentMode::TopK(k) => top_k(hits, k),
            ContainmentMode::Threshold(t) => {
                hits.retain(|h| h.score >= t);
                top_k(hits, usize::MAX)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::DeKind;
    use crate::profiler::minhash::HashFamily;

    fn sig(family: &HashFamily, lo: usize, hi: usize) -> MinhashSignature {
        let toks: Vec<String> = (lo..hi).map(|i| format!("v{i}")).collect();
        family.signature(toks.iter().map(String::as_str)).unwrap()
    }

    fn id(i: usize) -> DeId {
        DeId::derive(DeKind::Column, "t", &i.to_string())
    }

    fn params() -> ContainmentParams {
        ContainmentParams::from(&crate::config::IndexConfig::default())
    }

    #[test]
    fn single_entry_single_partition() {
        let f = HashFamily::new(64, 1);
        let idx = ContainmentIndex::build(vec![(id(0), sig(&f, 0, 20))], params()).unwrap();
        assert_eq!(idx.partitions.len(), 1);
        assert_eq!(idx.partitions[0].members, vec![0]);
    }

    #[test]
    fn geometric_partitions() {
        assert_ne!(partition_bucket(10, 4.0), partition_bucket(1000, 4.0));
        let f = HashFamily::new(64, 1);
        let idx =
            ContainmentIndex::build(vec![(id(0), sig(&f, 0, 10)), (id(1), sig(&f, 0, 1000))], params()).unwrap();
        assert_eq!(idx.partitions.len(), 2);
    }

    #[test]
    fn identity_and_disjoint() {
        let f = HashFamily::new(512, 3);
        let entries: Vec<_> = (0..20).map(|i| (id(i), sig(&f, i * 100, i * 100 + 50))).collect();
        let idx = ContainmentIndex::build(entries, params()).unwrap();
        let hits = idx.query(&sig(&f, 500, 550), ContainmentMode::TopK(3)).unwrap();
        assert_eq!(hits[0].de, id(5));
        assert_eq!(hits[0].score, 1.0);
        assert!(idx.query(&sig(&f, 9000, 9050), ContainmentMode::Threshold(0.1)).unwrap().is_empty());
    }

    #[test]
    fn incompatible_query_rejected() {
        let f = HashFamily::new(64, 1);
        let idx = ContainmentIndex::build(vec![(id(0), sig(&f, 0, 20))], params()).unwrap();
        let g = HashFamily::new(64, 2);
        assert!(idx.query(&sig(&g, 0, 20), ContainmentMode::TopK(1)).is_err());
    }

    #[test]
    fn rebuild_is_identical() {
        let f = HashFamily::new(128, 1);
        let mk = || {
            let entries = (0..10).map(|i| (id(i), sig(&f, i * 7, i * 7 + 30 + i))).collect();
            ContainmentIndex::build(entries, params()).unwrap()
        };
        assert_eq!(mk(), mk());
    }
}
