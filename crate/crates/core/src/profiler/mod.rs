//! Per-DE sketches: token sets, minhash signatures, numeric statistics and
//! mean-pooled solo embeddings.

pub mod embedding;
pub mod minhash;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use embedding::{Embedded, Embedder, EmbeddingProvider, HashedProvider, WordVectorFile};
pub use minhash::{estimate_containment, exact_containment, minhash_signature, HashFamily, MinhashSignature};
pub use store::{ProfileStore, StoreHeader, TableEntry};

use crate::config::ProfileConfig;
use crate::corpus::{table::parse_number, ColumnDe, ColumnType, Corpus, DocumentDe};
use crate::ids::{DeId, DeKind};
use crate::par::{self, Parallelism};
use crate::text;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub min: f64,
    pub max: f64,
    pub distinct_count: usize,
    pub value_count: usize,
    pub domain_size: f64,
}

impl NumericStats {
    pub fn from_values<'a>(cells: impl IntoIterator<Item = &'a str>) -> Option<Self> {
        let nums: Vec<f64> = cells.into_iter().filter_map(parse_number).collect();
        if nums.is_empty() {
            return None;
        }
        let min = nums.iter().copied().fold(f64::INFINITY, f64::min);
        let max = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let distinct: BTreeSet<u64> = nums.iter().map(|x| (x + 0.0).to_bits()).collect();
        Some(NumericStats { min, max, distinct_count: distinct.len(), value_count: nums.len(), domain_size: max - min })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoloEmbedding {
    pub content: Embedded,
    pub metadata: Embedded,
}

impl SoloEmbedding {
    /// metadata ‖ content, the 200-dim input encoding.
    pub fn input_encoding(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.metadata.vec.len() + self.content.vec.len());
        v.extend_from_slice(&self.metadata.vec);
        v.extend_from_slice(&self.content.vec);
        v
    }
}

/// Sketches for one column or document. Columns carry two sets: analyzed
/// words (`token_set`, used against documents) and normalized cell values
/// (`value_set`, used for column-to-column overlap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchBundle {
    pub owner: DeId,
    pub kind: DeKind,
    pub token_set: BTreeSet<String>,
    pub minhash: Option<MinhashSignature>,
    pub value_set: BTreeSet<String>,
    pub value_minhash: Option<MinhashSignature>,
    pub numeric: Option<NumericStats>,
    pub solo: Option<SoloEmbedding>,
    pub metadata_tokens: BTreeSet<String>,
}

impl SketchBundle {
    fn minimal(owner: DeId, kind: DeKind, metadata_tokens: BTreeSet<String>) -> Self {
        SketchBundle {
            owner,
            kind,
            token_set: BTreeSet::new(),
            minhash: None,
            value_set: BTreeSet::new(),
            value_minhash: None,
            numeric: None,
            solo: None,
            metadata_tokens,
        }
    }
}

pub fn column_tokens(col: &ColumnDe) -> BTreeSet<String> {
    col.non_empty_values().flat_map(text::analyze).collect()
}

pub fn column_values(col: &ColumnDe) -> BTreeSet<String> {
    col.non_empty_values().map(text::normalize_value).collect()
}

pub fn column_metadata_tokens(table_name: &str, column_name: &str) -> BTreeSet<String> {
    text::analyze(&format!("{table_name} {column_name}")).into_iter().collect()
}

pub fn doc_metadata_tokens(doc: &DocumentDe) -> BTreeSet<String> {
    text::analyze(&format!("{} {}", doc.title, doc.source)).into_iter().collect()
}

/// Shared profiling machinery, usable for ad-hoc text at query time.
pub struct Profiler {
    pub family: HashFamily,
    pub embedder: Embedder,
}

impl Profiler {
    pub fn new(cfg: &ProfileConfig) -> Result<Self> {
        Ok(Profiler { family: HashFamily::new(cfg.num_hashes, cfg.minhash_seed), embedder: Embedder::from_config(cfg)? })
    }

    pub fn header(&self, cfg: &ProfileConfig) -> StoreHeader {
        StoreHeader {
            num_hashes: cfg.num_hashes,
            minhash_seed: cfg.minhash_seed,
            projection_seed: cfg.projection_seed,
            provider: self.embedder.fingerprint(),
            embedding_dim: self.embedder.out_dim(),
        }
    }

    fn signature(&self, set: &BTreeSet<String>) -> Option<MinhashSignature> {
        self.family.signature(set.iter().map(String::as_str)).ok()
    }

    pub fn profile_column(&self, col: &ColumnDe, table_name: &str) -> SketchBundle {
        let metadata_tokens = column_metadata_tokens(table_name, &col.name);
        if col.tags.is_empty() {
            return SketchBundle::minimal(col.id, DeKind::Column, metadata_tokens);
        }
        let token_set = column_tokens(col);
        let value_set = column_values(col);
        let numeric = match col.inferred_type {
            ColumnType::Numeric => NumericStats::from_values(col.non_empty_values()),
            _ => None,
        };
        let solo = SoloEmbedding {
            content: self.embedder.embed_distinct(&token_set),
            metadata: self.embedder.embed_distinct(&metadata_tokens),
        };
        SketchBundle {
            owner: col.id,
            kind: DeKind::Column,
            minhash: self.signature(&token_set),
            value_minhash: self.signature(&value_set),
            token_set,
            value_set,
            numeric,
            solo: Some(solo),
            metadata_tokens,
        }
    }

    pub fn profile_text(
        &self,
        owner: DeId,
        bag: &crate::corpus::BagOfWords,
        metadata_tokens: BTreeSet<String>,
    ) -> SketchBundle {
        let token_set: BTreeSet<String> = bag.terms().cloned().collect();
        let solo = SoloEmbedding {
            content: self.embedder.embed(bag.tokens.iter().map(|(t, c)| (t.as_str(), *c))),
            metadata: self.embedder.embed_distinct(&metadata_tokens),
        };
        SketchBundle {
            owner,
            kind: DeKind::Document,
            minhash: self.signature(&token_set),
            token_set,
            value_set: BTreeSet::new(),
            value_minhash: None,
            numeric: None,
            solo: Some(solo),
            metadata_tokens,
        }
    }
}

enum Job<'a> {
    Column(&'a ColumnDe, &'a str),
    Doc(&'a DocumentDe),
}

pub fn profile_corpus(corpus: &Corpus, cfg: &ProfileConfig, par: Parallelism) -> Result<ProfileStore> {
    let profiler = Profiler::new(cfg)?;
    let mut jobs = Vec::with_capacity(corpus.columns.len() + corpus.docs.len());
    for col in corpus.columns.values() {
        let table = corpus.tables.get(&col.parent_table).map(|t| t.name.as_str()).unwrap_or("");
        jobs.push(Job::Column(col, table));
    }
    jobs.extend(corpus.docs.values().map(Job::Doc));

    let bundles = par::map(&jobs, par, |job| match job {
        Job::Column(col, table) => profiler.profile_column(col, table),
        Job::Doc(doc) => {
            let empty = crate::corpus::BagOfWords::from_terms(doc.id, std::iter::empty());
            let bag = corpus.bags.get(&doc.id).unwrap_or(&empty);
            profiler.profile_text(doc.id, bag, doc_metadata_tokens(doc))
        }
    });

    let mut failures = BTreeMap::new();
    let mut map = BTreeMap::new();
    for b in bundles {
        if let Some(solo) = &b.solo {
            if solo.content.zero {
                failures.insert(b.owner, "empty content: zero embedding".to_string());
            }
        }
        map.insert(b.owner, b);
    }
    let tables = corpus
        .tables
        .values()
        .map(|t| {
            let entry = TableEntry {
                id: t.id,
                name: t.name.clone(),
                column_ids: t.column_ids.clone(),
                row_count: t.row_count,
                metadata_tokens: text::analyze(&t.name).into_iter().collect(),
            };
            (t.id, entry)
        })
        .collect();
    if !failures.is_empty() {
        log::warn!("{} DEs profiled with empty content", failures.len());
    }
    Ok(ProfileStore { header: profiler.header(cfg), bundles: map, tables, failures })
}
