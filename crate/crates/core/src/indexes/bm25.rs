//! BM25 inverted index.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{top_k, ScoredHit, Signal};
use crate::ids::{DeId, DeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextField {
    Content,
    Metadata,
    Both,
}

pub struct TextEntry<'a> {
    pub id: DeId,
    pub kind: DeKind,
    pub tokens: Vec<(&'a str, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextIndex {
    pub field: TextField,
    pub k1: f64,
    pub b: f64,
    pub ids: Vec<DeId>,
    pub kinds: Vec<DeKind>,
    pub doc_lengths: Vec<u32>,
    pub avg_doc_length: f64,
    /// term -> (entry index, term frequency), entry indices ascending.
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl TextIndex {
    pub fn build(mut entries: Vec<TextEntry<'_>>, field: TextField, k1: f64, b: f64) -> Self {
        entries.sort_by_key(|e| e.id);
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let mut len = 0;
            let mut merged: BTreeMap<&str, u32> = BTreeMap::new();
            for &(t, tf) in &e.tokens {
                *merged.entry(t).or_default() += tf;
                len += tf;
            }
            for (t, tf) in merged {
                postings.entry(t.to_string()).or_default().push((i as u32, tf));
            }
            doc_lengths.push(len);
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_length = if entries.is_empty() { 0.0 } else { total as f64 / entries.len() as f64 };
        TextIndex {
            field,
            k1,
            b,
            ids: entries.iter().map(|e| e.id).collect(),
            kinds: entries.iter().map(|e| e.kind).collect(),
            doc_lengths,
            avg_doc_length,
            postings,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        let n = self.ids.len() as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn signal(&self) -> Signal {
        match self.field {
            TextField::Metadata => Signal::Bm25Metadata,
            _ => Signal::Bm25Content,
        }
    }

    /// Raw BM25 scores for every entry matching at least one query term.
    pub fn scores(&self, query: &[String], keep: impl Fn(DeId, DeKind) -> bool) -> Vec<ScoredHit> {
        let terms: BTreeSet<&str> = query.iter().map(String::as_str).collect();
        let mut acc: HashMap<u32, f64> = HashMap::new();
        let avg = if self.avg_doc_length > 0.0 { self.avg_doc_length } else { 1.0 };
        for term in terms {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for &(i, tf) in list {
                let (id, kind) = (self.ids[i as usize], self.kinds[i as usize]);
                if !keep(id, kind) {
                    continue;
                }
                let tf = f64::from(tf);
                let len = f64::from(self.doc_lengths[i as usize]);
                let norm = tf + self.k1 * (1.0 - self.b + self.b * len / avg);
                *acc.entry(i).or_default() += idf * tf * (self.k1 + 1.0) / norm;
            }
        }
        let signal = self.signal();
        acc.into_iter().map(|(i, score)| ScoredHit { de: self.ids[i as usize], score, signal }).collect()
    }

    pub fn search(&self, query: &[String], k: usize) -> Vec<ScoredHit> {
        top_k(self.scores(query, |_, _| true), k)
    }

    pub fn search_filtered(&self, query: &[String], k: usize, keep: impl Fn(DeId, DeKind) -> bool) -> Vec<ScoredHit> {
        top_k(self.scores(query, keep), k)
    }
}
