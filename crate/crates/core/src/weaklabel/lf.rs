//! Labeling functions: top-k probes of per-sample indexes.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::{IndexConfig, LfFloors};
use crate::ids::{DeId, DeKind};
use crate::indexes::{
    ContainmentIndex, ContainmentMode, ContainmentParams, LshParams, Signal, TextEntry, TextField, TextIndex,
    VectorIndex,
};
use crate::par::{self, Parallelism};
use crate::profiler::{ProfileStore, SketchBundle};
use crate::{Error, Result};

use super::sample::PairSample;

pub trait LabelingFunction: Send + Sync {
    fn name(&self) -> String;
    /// Columns this LF considers related to `doc`, at most `k`.
    fn probe(&self, doc: &SketchBundle, k: usize) -> Result<Vec<DeId>>;
}

/// Indexes restricted to the sampled columns.
pub struct SampleIndexes {
    pub solo: VectorIndex,
    pub containment: ContainmentIndex,
    pub content: TextIndex,
    pub metadata: TextIndex,
}

impl SampleIndexes {
    pub fn build(sample: &PairSample, store: &ProfileStore, cfg: &IndexConfig) -> Result<Self> {
        let bundles: Vec<&SketchBundle> = sample.cols.iter().filter_map(|c| store.get(*c)).collect();
        let solo = bundles
            .iter()
            .filter_map(|b| b.solo.as_ref().map(|s| (b.owner, s.content.vec.clone())))
            .collect();
        let sigs = bundles.iter().filter_map(|b| b.minhash.clone().map(|m| (b.owner, m))).collect();
        let content = bundles
            .iter()
            .map(|b| TextEntry { id: b.owner, kind: DeKind::Column, tokens: b.token_set.iter().map(|t| (t.as_str(), 1)).collect() })
            .collect();
        let metadata = bundles
            .iter()
            .map(|b| TextEntry {
                id: b.owner,
                kind: DeKind::Column,
                tokens: b.metadata_tokens.iter().map(|t| (t.as_str(), 1)).collect(),
            })
            .collect();
        Ok(SampleIndexes {
            solo: VectorIndex::build(
                solo,
                store.header.embedding_dim,
                Signal::SoloSemantic,
                crate::config::VectorBackend::ExactScan,
                &LshParams::from(cfg),
            )?,
            containment: ContainmentIndex::build(sigs, ContainmentParams::from(cfg))?,
            content: TextIndex::build(content, TextField::Content, cfg.bm25_k1, cfg.bm25_b),
            metadata: TextIndex::build(metadata, TextField::Metadata, cfg.bm25_k1, cfg.bm25_b),
        })
    }
}

pub struct SoloSemanticLf<'a> {
    pub index: &'a VectorIndex,
    pub floor: f64,
}

impl LabelingFunction for SoloSemanticLf<'_> {
    fn name(&self) -> String {
        "solo_semantic".into()
    }

    fn probe(&self, doc: &SketchBundle, k: usize) -> Result<Vec<DeId>> {
        let Some(solo) = &doc.solo else { return Ok(Vec::new()) };
        let hits = self.index.query(&solo.content.vec, k)?;
        Ok(hits.into_iter().filter(|h| h.score >= self.floor).map(|h| h.de).collect())
    }
}

pub struct ContainmentLf<'a> {
    pub index: &'a ContainmentIndex,
    pub floor: f64,
}

impl LabelingFunction for ContainmentLf<'_> {
    fn name(&self) -> String {
        "syntactic_containment".into()
    }

    fn probe(&self, doc: &SketchBundle, k: usize) -> Result<Vec<DeId>> {
        let Some(sig) = &doc.minhash else { return Ok(Vec::new()) };
        let hits = self.index.query(sig, ContainmentMode::TopK(k))?;
        Ok(hits.into_iter().filter(|h| h.score >= self.floor).map(|h| h.de).collect())
    }
}

pub struct ContentLf<'a> {
    pub index: &'a TextIndex,
    pub floor: f64,
}

impl LabelingFunction for ContentLf<'_> {
    fn name(&self) -> String {
        "bm25_content".into()
    }

    fn probe(&self, doc: &SketchBundle, k: usize) -> Result<Vec<DeId>> {
        let query: Vec<String> = doc.token_set.iter().cloned().collect();
        let hits = self.index.search(&query, k);
        Ok(hits.into_iter().filter(|h| h.score > self.floor).map(|h| h.de).collect())
    }
}

pub struct MetadataLf<'a> {
    pub index: &'a TextIndex,
    pub floor: f64,
}

impl LabelingFunction for MetadataLf<'_> {
    fn name(&self) -> String {
        "bm25_metadata".into()
    }

    fn probe(&self, doc: &SketchBundle, k: usize) -> Result<Vec<DeId>> {
        let query: Vec<String> = doc.token_set.union(&doc.metadata_tokens).cloned().collect();
        let hits = self.index.search(&query, k);
        Ok(hits.into_iter().filter(|h| h.score > self.floor).map(|h| h.de).collect())
    }
}

/// The four index-probing LFs, in a fixed order.
pub fn builtin_lfs<'a>(ix: &'a SampleIndexes, floors: &LfFloors) -> Result<Vec<Box<dyn LabelingFunction + 'a>>> {
    if ix.solo.is_empty() {
        return Err(Error::MissingIndex("solo embedding index over sampled columns".into()));
    }
    if ix.containment.is_empty() {
        return Err(Error::MissingIndex("containment index over sampled columns".into()));
    }
    if ix.content.is_empty() || ix.metadata.is_empty() {
        return Err(Error::MissingIndex("text index over sampled columns".into()));
    }
    Ok(vec![
        Box::new(SoloSemanticLf { index: &ix.solo, floor: floors.cosine }),
        Box::new(ContainmentLf { index: &ix.containment, floor: floors.containment }),
        Box::new(ContentLf { index: &ix.content, floor: floors.bm25 }),
        Box::new(MetadataLf { index: &ix.metadata, floor: floors.bm25 }),
    ])
}

/// Sparse votes: an entry exists iff at least one LF voted 1; bit i is LF i.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub lf_names: Vec<String>,
    pub k_probe: usize,
    pub docs: Vec<DeId>,
    pub cols: Vec<DeId>,
    pub votes: BTreeMap<(DeId, DeId), u32>,
}

impl LabelMatrix {
    pub fn num_lfs(&self) -> usize {
        self.lf_names.len()
    }

    pub fn votes_for(&self, lf: usize) -> usize {
        self.votes.values().filter(|v| *v & (1 << lf) != 0).count()
    }

    pub fn universe(&self) -> impl Iterator<Item = (DeId, DeId)> + '_ {
        self.docs.iter().flat_map(move |d| self.cols.iter().map(move |c| (*d, *c)))
    }

    pub fn vote_vector(&self, doc: DeId, col: DeId) -> u32 {
        self.votes.get(&(doc, col)).copied().unwrap_or(0)
    }
}

pub fn apply_labeling_functions(
    sample: &PairSample,
    lfs: &[Box<dyn LabelingFunction + '_>],
    store: &ProfileStore,
    k_probe: usize,
    par: Parallelism,
) -> Result<LabelMatrix> {
    assert!(lfs.len() <= 32, "at most 32 labeling functions");
    let cols: BTreeSet<DeId> = sample.cols.iter().copied().collect();
    let per_doc = par::map(&sample.docs, par, |doc| -> Result<Vec<((DeId, DeId), u32)>> {
        let Some(bundle) = store.get(*doc) else { return Err(Error::UnknownDe(*doc)) };
        let mut row: BTreeMap<DeId, u32> = BTreeMap::new();
        for (i, lf) in lfs.iter().enumerate() {
            let picks = lf.probe(bundle, k_probe)?;
            for c in picks.into_iter().filter(|c| cols.contains(c)).take(k_probe) {
                *row.entry(c).or_default() |= 1 << i;
            }
        }
        Ok(row.into_iter().map(|(c, v)| ((*doc, c), v)).collect())
    });
    let mut votes = BTreeMap::new();
    for row in per_doc {
        votes.extend(row?);
    }
    Ok(LabelMatrix {
        lf_names: lfs.iter().map(|l| l.name()).collect(),
        k_probe,
        docs: sample.docs.clone(),
        cols: sample.cols.clone(),
        votes,
    })
}
