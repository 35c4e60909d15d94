//! Relation builders: document to table, joins, PK-FK and unionability.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::matching::max_bipartite_matching;
use super::similarity::{feature_jaccard, name_features, numeric_overlap, ColumnPairScores};
use crate::config::{EkgConfig, TableCombiner};
use crate::corpus::{ColumnDe, Corpus, TaskTag};
use crate::ids::{DeId, DeKind};
use crate::indexes::{cosine, rank_order, ContainmentMode, IndexSet, VectorIndex};
use crate::profiler::{estimate_containment, exact_containment, ProfileStore};
use crate::text::normalize_value;
use crate::{Error, Result};

/// Hashed name features of every column, with postings for candidate lookup.
#[derive(Debug, Clone, Default)]
pub struct NameIndex {
    pub ids: Vec<DeId>,
    pub features: Vec<Vec<u64>>,
    postings: BTreeMap<u64, Vec<u32>>,
}

impl NameIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut idx = NameIndex::default();
        for (i, col) in corpus.columns.values().enumerate() {
            let f = name_features(&col.name);
            for &h in &f {
                idx.postings.entry(h).or_default().push(i as u32);
            }
            idx.ids.push(col.id);
            idx.features.push(f);
        }
        idx
    }

    pub fn features_of(&self, id: DeId) -> Option<&[u64]> {
        self.ids.binary_search(&id).ok().map(|i| self.features[i].as_slice())
    }

    /// Every column sharing at least one feature with `id`, with its name similarity.
    pub fn similar(&self, id: DeId, keep: impl Fn(DeId) -> bool) -> Vec<(DeId, f64)> {
        let Some(me) = self.features_of(id) else { return Vec::new() };
        let mut inter: BTreeMap<u32, usize> = BTreeMap::new();
        for h in me {
            for &m in self.postings.get(h).into_iter().flatten() {
                *inter.entry(m).or_insert(0) += 1;
            }
        }
        let mut out: Vec<(DeId, f64)> = inter
            .into_iter()
            .filter(|&(m, _)| self.ids[m as usize] != id && keep(self.ids[m as usize]))
            .map(|(m, i)| {
                let other = &self.features[m as usize];
                (self.ids[m as usize], i as f64 / (me.len() + other.len() - i) as f64)
            })
            .collect();
        out.sort_by(|a, b| rank_order((a.1, a.0), (b.1, b.0)));
        out
    }
}

/// Which vector space document queries run in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocSpace {
    Joint,
    Solo,
}

/// Read-only view over the built artifacts used by every builder.
#[derive(Clone, Copy)]
pub struct RelationContext<'a> {
    pub corpus: &'a Corpus,
    pub store: &'a ProfileStore,
    pub indexes: &'a IndexSet,
    pub names: &'a NameIndex,
    pub cfg: &'a EkgConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableHit {
    pub table: DeId,
    pub score: f64,
    /// Contributing column hits, best first.
    pub columns: Vec<(DeId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinHit {
    pub column: DeId,
    pub containment_fwd: f64,
    pub containment_rev: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkFkLink {
    pub fk: DeId,
    pub pk: DeId,
    pub containment: f64,
    pub uniqueness: f64,
    pub name_sim: f64,
    pub numeric_overlap: Option<f64>,
}

impl PkFkLink {
    pub fn weight(&self) -> f64 {
        self.containment * self.uniqueness * self.name_sim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionHit {
    pub table: DeId,
    pub score: f64,
    pub matching_total: f64,
    pub source_columns: usize,
    /// Matched (column of the query table, column of `table`, pair score).
    pub pairs: Vec<(DeId, DeId, f64)>,
}

impl<'a> RelationContext<'a> {
    pub fn column(&self, id: DeId) -> Result<&'a ColumnDe> {
        match self.corpus.columns.get(&id) {
            Some(c) => Ok(c),
            None => Err(self.kind_error(id, DeKind::Column)),
        }
    }

    fn kind_error(&self, id: DeId, expected: DeKind) -> Error {
        match self.corpus.kind_of(id) {
            Some(actual) => Error::WrongKind { id, expected: expected.as_str(), actual: actual.as_str() },
            None => Error::UnknownDe(id),
        }
    }

    fn parent(&self, col: DeId) -> Option<DeId> {
        self.corpus.columns.get(&col).map(|c| c.parent_table)
    }

    fn other_table(&self, table: DeId) -> impl Fn(DeId) -> bool + '_ {
        move |c| self.parent(c).is_some_and(|p| p != table)
    }

    /// Joint index when trained, otherwise the solo index.
    /// The joint space when a joint index exists, otherwise the solo space.
    pub fn doc_space(&self) -> DocSpace {
        if self.indexes.joint.is_some() { DocSpace::Joint } else { DocSpace::Solo }
    }

    pub fn doc_index(&self) -> &'a VectorIndex {
        self.doc_index_in(self.doc_space())
    }

    pub fn doc_index_in(&self, space: DocSpace) -> &'a VectorIndex {
        match (space, &self.indexes.joint) {
            (DocSpace::Joint, Some(j)) => j,
            _ => &self.indexes.solo,
        }
    }

    /// The stored document's vector in the space of [`Self::doc_index`].
    pub fn doc_vector(&self, doc: DeId) -> Result<Vec<f64>> {
        self.doc_vector_in(self.doc_space(), doc)
    }

    pub fn doc_vector_in(&self, space: DocSpace, doc: DeId) -> Result<Vec<f64>> {
        if !self.corpus.docs.contains_key(&doc) {
            return Err(self.kind_error(doc, DeKind::Document));
        }
        if let (DocSpace::Joint, Some(j)) = (space, &self.indexes.joint) {
            return Ok(j.vector(doc).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; j.dim]));
        }
        let b = self.store.get(doc).ok_or(Error::UnknownDe(doc))?;
        Ok(b.solo.as_ref().map(|s| s.content.vec.clone()).unwrap_or_else(|| vec![0.0; self.indexes.solo.dim]))
    }

    /// Cross-modal column hits for a query vector.
    pub fn doc_columns(&self, q: &[f64], hits: usize) -> Result<Vec<(DeId, f64)>> {
        self.doc_columns_in(self.doc_space(), q, hits)
    }

    pub fn doc_columns_in(&self, space: DocSpace, q: &[f64], hits: usize) -> Result<Vec<(DeId, f64)>> {
        let cross = |id: DeId| self.corpus.columns.get(&id).is_some_and(|c| c.has_tag(TaskTag::CrossModal));
        let found = self.doc_index_in(space).query_filtered(q, hits, cross)?;
        Ok(found.into_iter().map(|h| (h.de, h.score)).collect())
    }

    /// Tables ranked by the combined score of their column hits.
    pub fn doc_to_table_vec(&self, q: &[f64], k: usize) -> Result<Vec<TableHit>> {
        self.doc_to_table_vec_in(self.doc_space(), q, k)
    }

    pub fn doc_to_table_vec_in(&self, space: DocSpace, q: &[f64], k: usize) -> Result<Vec<TableHit>> {
        if q.iter().all(|x| *x == 0.0) {
            log::warn!("document embedding is zero; no tables");
            return Ok(Vec::new());
        }
        let mut by_table: BTreeMap<DeId, Vec<(DeId, f64)>> = BTreeMap::new();
        for (col, s) in self.doc_columns_in(space, q, self.cfg.doc_column_hits)? {
            if let Some(t) = self.parent(col) {
                by_table.entry(t).or_default().push((col, s.max(0.0)));
            }
        }
        let mut out: Vec<TableHit> = by_table
            .into_iter()
            .map(|(table, mut columns)| {
                columns.sort_by(|a, b| rank_order((a.1, a.0), (b.1, b.0)));
                let score = match self.cfg.table_combiner {
                    TableCombiner::Max => columns[0].1,
                    TableCombiner::SumTop3 => columns.iter().take(3).map(|c| c.1).sum::<f64>() / 3.0,
                };
                TableHit { table, score, columns }
            })
            .filter(|h| h.score > 0.0)
            .collect();
        out.sort_by(|a, b| rank_order((a.score, a.table), (b.score, b.table)));
        out.truncate(k);
        Ok(out)
    }

    pub fn doc_to_table(&self, doc: DeId, k: usize) -> Result<Vec<TableHit>> {
        self.doc_to_table_in(self.doc_space(), doc, k)
    }

    pub fn doc_to_table_in(&self, space: DocSpace, doc: DeId, k: usize) -> Result<Vec<TableHit>> {
        let q = self.doc_vector_in(space, doc)?;
        self.doc_to_table_vec_in(space, &q, k)
    }

    /// Columns of other tables overlapping `col`, scored by containment in
    /// the better direction.
    pub fn syntactic_joins(&self, col: DeId, k: usize) -> Result<Vec<JoinHit>> {
        let c = self.column(col)?;
        let Some(sig) = self.store.get(col).and_then(|b| b.value_minhash.as_ref()) else {
            return Ok(Vec::new());
        };
        let found = self.indexes.values.query_filtered(sig, ContainmentMode::TopK(usize::MAX), self.other_table(c.parent_table))?;
        let mut out = Vec::with_capacity(found.len());
        for h in found {
            let Some(other) = self.indexes.values.signature(h.de) else { continue };
            let rev = estimate_containment(other, sig)?;
            out.push(JoinHit { column: h.de, containment_fwd: h.score, containment_rev: rev, score: h.score.max(rev) });
        }
        out.sort_by(|a, b| rank_order((a.score, a.column), (b.score, b.column)));
        out.truncate(k);
        Ok(out)
    }

    /// Share of non-empty cells whose value occurs exactly once in the column.
    pub fn uniqueness(col: &ColumnDe) -> f64 {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut total = 0usize;
        for v in col.non_empty_values() {
            *counts.entry(normalize_value(v)).or_insert(0) += 1;
            total += 1;
        }
        if total == 0 {
            return 0.0;
        }
        counts.values().filter(|&&n| n == 1).count() as f64 / total as f64
    }

    /// Candidate primary keys for one foreign-key column.
    pub fn pkfk_for(&self, fk: DeId, uniqueness: &BTreeMap<DeId, f64>) -> Result<Vec<PkFkLink>> {
        let f = self.column(fk)?;
        if !f.has_tag(TaskTag::PkFkCandidate) {
            return Ok(Vec::new());
        }
        let Some(fb) = self.store.get(fk) else { return Ok(Vec::new()) };
        let Some(sig) = fb.value_minhash.as_ref() else { return Ok(Vec::new()) };
        let keep = |id: DeId| {
            self.corpus.columns.get(&id).is_some_and(|c| c.parent_table != f.parent_table && c.has_tag(TaskTag::PkFkCandidate))
        };
        let mut out = Vec::new();
        for h in self.indexes.values.query_filtered(sig, ContainmentMode::TopK(usize::MAX), keep)? {
            let Some(pb) = self.store.get(h.de) else { continue };
            let containment = exact_containment(&fb.value_set, &pb.value_set)?;
            if containment < self.cfg.pkfk_containment_min {
                continue;
            }
            let uniq = uniqueness.get(&h.de).copied().unwrap_or(0.0);
            if uniq < self.cfg.pk_uniqueness {
                continue;
            }
            let (Some(fa), Some(pa)) = (self.names.features_of(fk), self.names.features_of(h.de)) else { continue };
            let name_sim = feature_jaccard(fa, pa);
            if name_sim < self.cfg.pkfk_name_min {
                continue;
            }
            let numeric_overlap = match (&fb.numeric, &pb.numeric) {
                (Some(a), Some(b)) => {
                    let o = numeric_overlap(a, b);
                    if o <= 0.0 {
                        continue;
                    }
                    Some(o)
                }
                _ => None,
            };
            out.push(PkFkLink { fk, pk: h.de, containment, uniqueness: uniq, name_sim, numeric_overlap });
        }
        out.sort_by(|a, b| rank_order((a.weight(), a.pk), (b.weight(), b.pk)));
        Ok(out)
    }

    pub fn uniqueness_map(&self) -> BTreeMap<DeId, f64> {
        self.corpus.columns_with(TaskTag::PkFkCandidate).map(|c| (c.id, Self::uniqueness(c))).collect()
    }

    /// The four-measure comparison of two columns.
    pub fn column_pair_scores(&self, a: DeId, b: DeId) -> Result<ColumnPairScores> {
        self.column(a)?;
        self.column(b)?;
        let mut s = ColumnPairScores::default();
        if let (Some(fa), Some(fb)) = (self.names.features_of(a), self.names.features_of(b)) {
            s.name_sim = Some(feature_jaccard(fa, fb));
        }
        let (ba, bb) = (self.store.get(a), self.store.get(b));
        if let (Some(x), Some(y)) = (ba.and_then(|b| b.value_minhash.as_ref()), bb.and_then(|b| b.value_minhash.as_ref())) {
            s.containment_fwd = Some(estimate_containment(x, y)?);
            s.containment_rev = Some(estimate_containment(y, x)?);
        }
        if let (Some(x), Some(y)) = (ba.and_then(|b| b.numeric.as_ref()), bb.and_then(|b| b.numeric.as_ref())) {
            s.numeric_sim = Some(numeric_overlap(x, y));
        }
        if let (Some(x), Some(y)) = (self.indexes.solo.vector(a), self.indexes.solo.vector(b)) {
            s.semantic_sim = Some(((cosine(x, y) + 1.0) / 2.0).clamp(0.0, 1.0));
        }
        Ok(s)
    }

    pub fn column_ensemble_score(&self, a: DeId, b: DeId) -> Result<(ColumnPairScores, f64)> {
        let s = self.column_pair_scores(a, b)?;
        let combined = s.combined(&self.cfg.weights);
        Ok((s, combined))
    }

    /// Up to `per_column_k` columns of other tables most unionable with
    /// `col`, drawn from value, embedding and name candidates.
    pub fn unionable_columns(&self, col: DeId, per_column_k: usize) -> Result<Vec<(DeId, f64)>> {
        let c = self.column(col)?;
        let keep = self.other_table(c.parent_table);
        let mut cands: BTreeSet<DeId> = BTreeSet::new();
        if let Some(sig) = self.store.get(col).and_then(|b| b.value_minhash.as_ref()) {
            let hits = self.indexes.values.query_filtered(sig, ContainmentMode::TopK(per_column_k), &keep)?;
            cands.extend(hits.into_iter().map(|h| h.de));
        }
        if let Some(v) = self.indexes.solo.vector(col) {
            cands.extend(self.indexes.solo.query_filtered(v, per_column_k, &keep)?.into_iter().map(|h| h.de));
        }
        cands.extend(self.names.similar(col, &keep).into_iter().take(per_column_k).map(|(id, _)| id));
        let mut scored = Vec::with_capacity(cands.len());
        for other in cands {
            scored.push((other, self.column_ensemble_score(col, other)?.1));
        }
        scored.sort_by(|a, b| rank_order((a.1, a.0), (b.1, b.0)));
        scored.truncate(per_column_k);
        Ok(scored)
    }

    /// Normalized maximum matching between the columns of two tables.
    pub fn unionability(&self, t: DeId, r: DeId) -> Result<UnionHit> {
        let tc = &self.table(t)?.column_ids;
        let rc = &self.table(r)?.column_ids;
        let mut m = vec![vec![0.0; rc.len()]; tc.len()];
        for (i, a) in tc.iter().enumerate() {
            for (j, b) in rc.iter().enumerate() {
                m[i][j] = self.column_ensemble_score(*a, *b)?.1;
            }
        }
        let matching = max_bipartite_matching(&m, self.cfg.min_pair_score);
        let pairs = matching.pairs.iter().map(|&(i, j)| (tc[i], rc[j], m[i][j])).collect();
        Ok(UnionHit {
            table: r,
            score: (matching.total / tc.len() as f64).clamp(0.0, 1.0),
            matching_total: matching.total,
            source_columns: tc.len(),
            pairs,
        })
    }

    fn table(&self, t: DeId) -> Result<&'a crate::corpus::TableDe> {
        match self.corpus.tables.get(&t) {
            Some(x) => Ok(x),
            None => Err(self.kind_error(t, DeKind::Table)),
        }
    }

    /// Candidate tables from per-column unionable columns, ranked by
    /// normalized matching score.
    pub fn unionable_tables(&self, t: DeId, k: usize) -> Result<Vec<UnionHit>> {
        let table = self.table(t)?;
        let mut cand_tables = BTreeSet::new();
        for &c in &table.column_ids {
            for (other, _) in self.unionable_columns(c, self.cfg.per_column_k)? {
                if let Some(p) = self.parent(other) {
                    cand_tables.insert(p);
                }
            }
        }
        let mut out = Vec::with_capacity(cand_tables.len());
        for r in cand_tables {
            let hit = self.unionability(t, r)?;
            if hit.score > 0.0 {
                out.push(hit);
            }
        }
        out.sort_by(|a, b| rank_order((a.score, a.table), (b.score, b.table)));
        out.truncate(k);
        Ok(out)
    }
}
