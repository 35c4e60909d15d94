//! Query-time structures: BM25 text indexes, an LSH containment index and
//! cosine vector indexes.

pub mod bm25;
pub mod containment;
pub mod persist;
pub mod vector;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use bm25::{TextEntry, TextField, TextIndex};
pub use containment::{ContainmentIndex, ContainmentMode, ContainmentParams};
pub use persist::IndexSet;
pub use vector::{cosine, LshParams, VectorIndex};

use crate::ids::DeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Bm25Content,
    Bm25Metadata,
    Containment,
    SoloSemantic,
    JointSemantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub de: DeId,
    pub score: f64,
    pub signal: Signal,
}

/// Descending score, ascending id.
pub fn rank_order(a: (f64, DeId), b: (f64, DeId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

pub fn sort_hits(hits: &mut [ScoredHit]) {
    hits.sort_by(|a, b| rank_order((a.score, a.de), (b.score, b.de)));
}

pub fn top_k(mut hits: Vec<ScoredHit>, k: usize) -> Vec<ScoredHit> {
    if k < hits.len() {
        hits.select_nth_unstable_by(k, |a, b| rank_order((a.score, a.de), (b.score, b.de)));
        hits.truncate(k);
    }
    sort_hits(&mut hits);
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::DeKind;

    #[test]
    fn top_k_orders_and_breaks_ties() {
        let ids: Vec<DeId> = (0..5).map(|i| DeId::derive(DeKind::Column, "x", &i.to_string())).collect();
        let hits: Vec<ScoredHit> = ids
            .iter()
            .enumerate()
            .map(|(i, &de)| ScoredHit { de, score: (i % 2) as f64, signal: Signal::Containment })
            .collect();
        let top = top_k(hits.clone(), 3);
        assert_eq!(top.len(), 3);
        assert!(top[0].score == 1.0 && top[1].score == 1.0 && top[0].de < top[1].de);
        let mut all = hits;
        sort_hits(&mut all);
        assert_eq!(top, all[..3]);
    }
}
