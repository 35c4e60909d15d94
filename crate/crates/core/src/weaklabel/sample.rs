//! Seeded document/column samples and gold labels over the pair universe.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TaskTag};
use crate::ids::DeId;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub docs: Vec<DeId>,
    pub cols: Vec<DeId>,
    pub seed: u64,
    pub sample_fraction: f64,
}

fn draw(ids: &[DeId], fraction: f64, rng: &mut ChaCha8Rng) -> Vec<DeId> {
    let n = ((fraction * ids.len() as f64).ceil() as usize).clamp(1, ids.len());
    let mut out: Vec<DeId> = index::sample(rng, ids.len(), n).into_iter().map(|i| ids[i]).collect();
    out.sort();
    out
}

impl PairSample {
    pub fn draw(docs: &[DeId], cols: &[DeId], fraction: f64, seed: u64) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyModality("documents"));
        }
        if cols.is_empty() {
            return Err(Error::EmptyModality("cross-modal columns"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = draw(docs, fraction, &mut rng);
        let cols = draw(cols, fraction, &mut rng);
        Ok(PairSample { docs, cols, seed, sample_fraction: fraction })
    }

    pub fn universe_size(&self) -> usize {
        self.docs.len() * self.cols.len()
    }

    pub fn contains(&self, doc: DeId, col: DeId) -> bool {
        self.docs.binary_search(&doc).is_ok() && self.cols.binary_search(&col).is_ok()
    }
}

pub fn sample_pairs(corpus: &Corpus, fraction: f64, seed: u64) -> Result<PairSample> {
    let docs: Vec<DeId> = corpus.docs.keys().copied().collect();
    let cols: Vec<DeId> = corpus.columns_with(TaskTag::CrossModal).map(|c| c.id).collect();
    PairSample::draw(&docs, &cols, fraction, seed)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldLabels {
    pub entries: BTreeMap<(DeId, DeId), bool>,
    pub note: String,
}

impl GoldLabels {
    /// Balanced gold over the sampled universe: up to `ceil(fraction·|truth|)`
    /// positives, and enough negatives to match them (at least `min_pairs` total).
    pub fn from_truth(
        sample: &PairSample,
        truth: &BTreeSet<(DeId, DeId)>,
        fraction: f64,
        min_pairs: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positives: Vec<(DeId, DeId)> = truth.iter().copied().filter(|&(d, c)| sample.contains(d, c)).collect();
        let want_pos = ((fraction * truth.len() as f64).ceil() as usize).min(positives.len());
        let mut entries = BTreeMap::new();
        for i in index::sample(&mut rng, positives.len(), want_pos) {
            entries.insert(positives[i], true);
        }
        let universe = sample.universe_size();
        let negatives = universe - positives.len();
        let want_neg = want_pos.max(min_pairs.saturating_sub(want_pos)).min(negatives);
        let mut picked = 0;
        if want_neg > 0 {
            for i in index::sample(&mut rng, universe, universe) {
                let pair = (sample.docs[i / sample.cols.len()], sample.cols[i % sample.cols.len()]);
                if truth.contains(&pair) {
                    continue;
                }
                entries.insert(pair, false);
                picked += 1;
                if picked == want_neg {
                    break;
                }
            }
        }
        let note = format!("{want_pos} positives, {picked} negatives of {} truth links", truth.len());
        GoldLabels { entries, note }
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::artifact(path, e))?;
        let mut entries = BTreeMap::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 || (i == 0 && fields[0] == "doc_id") {
                continue;
            }
            let parse = |s: &str| s.parse::<DeId>().map_err(|e| Error::artifact(path, format!("line {}: {e}", i + 1)));
            entries.insert((parse(fields[0])?, parse(fields[1])?), fields[2] == "1");
        }
        Ok(GoldLabels { entries, note: format!("loaded from {}", path.display()) })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "doc_id,col_id,label")?;
        for ((d, c), l) in &self.entries {
            writeln!(out, "{d},{c},{}", u8::from(*l))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::DeKind;

    fn ids(kind: DeKind, n: usize) -> Vec<DeId> {
        (0..n).map(|i| DeId::derive(kind, "p", &i.to_string())).collect()
    }

    #[test]
    fn counts_and_determinism() {
        let docs = ids(DeKind::Document, 100);
        let cols = ids(DeKind::Column, 200);
        let s = PairSample::draw(&docs, &cols, 0.1, 4).unwrap();
        assert_eq!((s.docs.len(), s.cols.len(), s.universe_size()), (10, 20, 200));
        assert_eq!(s, PairSample::draw(&docs, &cols, 0.1, 4).unwrap());
        let full = PairSample::draw(&docs, &cols, 1.0, 4).unwrap();
        assert_eq!(full.universe_size(), 20_000);
        assert!(matches!(PairSample::draw(&[], &cols, 0.1, 1), Err(Error::EmptyModality(_))));
    }

    #[test]
    fn gold_is_balanced_and_inside_universe() {
        let docs = ids(DeKind::Document, 10);
        let cols = ids(DeKind::Column, 10);
        let s = PairSample::draw(&docs, &cols, 1.0, 1).unwrap();
        let truth: BTreeSet<_> = (0..10).map(|i| (docs[i], cols[i])).collect();
        let g = GoldLabels::from_truth(&s, &truth, 1.0, 4, 2);
        let pos = g.entries.values().filter(|v| **v).count();
        assert_eq!(pos, 10);
        assert_eq!(g.entries.len(), 20);
        for ((d, c), l) in &g.entries {
            assert_eq!(*l, truth.contains(&(*d, *c)));
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gold.csv");
        g.save_csv(&p).unwrap();
        assert_eq!(GoldLabels::load_csv(&p).unwrap().entries, g.entries);
    }
}
