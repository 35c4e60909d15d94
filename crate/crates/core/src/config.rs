//! Lake-wide configuration. Every tunable default lives here by name so a
//! single JSON file (plus CLI overrides) describes a build completely.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::par::Parallelism;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LakeConfig {
    /// Master seed; per-stage seeds are derived from it.
    pub seed: u64,
    pub parallelism: Parallelism,
    pub corpus: CorpusConfig,
    pub profile: ProfileConfig,
    pub index: IndexConfig,
    pub labels: LabelConfig,
    pub train: TrainConfig,
    pub ekg: EkgConfig,
}

impl Default for LakeConfig {
    fn default() -> Self {
        LakeConfig {
            seed: 7,
            parallelism: Parallelism::default(),
            corpus: CorpusConfig::default(),
            profile: ProfileConfig::default(),
            index: IndexConfig::default(),
            labels: LabelConfig::default(),
            train: TrainConfig::default(),
            ekg: EkgConfig::default(),
        }
    }
}

impl LakeConfig {
    pub fn load(path: &std::path::Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Seed for one pipeline stage, derived from the master seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        let mut h = crate::profiler::minhash::fnv1a64(stage.as_bytes());
        h ^= self.seed;
        crate::profiler::minhash::splitmix64(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// distinct/row_count below this marks a column Categorical.
    pub categorical_ratio: f64,
    /// Mean cell length above this makes a column long text (no PK-FK).
    pub long_text_chars: usize,
    /// Documents longer than this many words are split.
    pub max_de_words: usize,
    /// Tokens in more than this fraction of documents are dropped.
    pub df_cutoff: f64,
    /// Fraction of non-empty cells that must parse for Numeric/Date.
    pub type_threshold: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            categorical_ratio: 0.05,
            long_text_chars: 200,
            max_de_words: 500,
            df_cutoff: 0.2,
            type_threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Mean over distinct tokens.
    Distinct,
    /// Mean over every occurrence.
    Multiset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    pub num_hashes: usize,
    pub minhash_seed: u64,
    pub projection_seed: u64,
    /// Output dimension of each solo sub-encoding.
    pub embedding_dim: usize,
    /// Word-vector file (`word v1 .. vD` per line). None selects the hashed fallback.
    pub word_vectors: Option<PathBuf>,
    /// Dimension of the hashed fallback provider.
    pub fallback_dim: usize,
    pub pooling: Pooling,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            num_hashes: 512,
            minhash_seed: 0x5eed_0001,
            projection_seed: 0x5eed_0002,
            embedding_dim: 100,
            word_vectors: None,
            fallback_dim: 300,
            pooling: Pooling::Distinct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorBackend {
    ExactScan,
    RandomHyperplaneLsh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub bm25_k1: f64,
    pub bm25_b: f64,
    /// Geometric ratio between containment-index cardinality partitions.
    pub partition_ratio: f64,
    /// Default containment threshold for threshold-mode probes.
    pub containment_threshold: f64,
    /// Required LSH collision probability at the threshold.
    pub collision_target: f64,
    /// Rows-per-band levels stored per partition.
    pub band_rows: Vec<usize>,
    pub vector_backend: VectorBackend,
    pub lsh_hyperplanes: usize,
    pub lsh_tables: usize,
    /// Fraction of entries re-ranked exactly by the hyperplane backend.
    pub lsh_candidate_fraction: f64,
    pub lsh_seed: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            bm25_k1: 1.2,
            bm25_b: 0.75,
            partition_ratio: 4.0,
            containment_threshold: 0.5,
            collision_target: 0.9,
            band_rows: vec![1, 2, 4, 8],
            vector_backend: VectorBackend::ExactScan,
            lsh_hyperplanes: 16,
            lsh_tables: 8,
            lsh_candidate_fraction: 0.4,
            lsh_seed: 0x5eed_0003,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LfFloors {
    /// BM25 hits must score strictly above this.
    pub bm25: f64,
    pub containment: f64,
    pub cosine: f64,
}

impl Default for LfFloors {
    fn default() -> Self {
        LfFloors { bm25: 0.0, containment: 0.3, cosine: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    pub sample_fraction: f64,
    pub k_probe: usize,
    pub floors: LfFloors,
    /// Gold size as a fraction of the ground-truth size.
    pub gold_fraction: f64,
    pub min_gold_pairs: usize,
    /// LFs below this fraction of the best LF's gold accuracy are switched off.
    pub prune_rel_threshold: f64,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub disc_hidden: usize,
    pub disc_lr: f64,
    pub disc_max_iter: usize,
    pub disc_tol: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            sample_fraction: 0.1,
            k_probe: 10,
            floors: LfFloors::default(),
            gold_fraction: 0.1,
            min_gold_pairs: 20,
            prune_rel_threshold: 0.5,
            em_max_iter: 200,
            em_tol: 1e-9,
            disc_hidden: 128,
            disc_lr: 0.05,
            disc_max_iter: 500,
            disc_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardCutoff {
    AvgNegativeDistance,
    MedianNegativeDistance,
    AllNegatives,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Triplet margin.
    pub margin: f64,
    pub batch_fraction: f64,
    pub pos_threshold: f64,
    pub hard_cutoff: HardCutoff,
    pub learning_rate: f64,
    pub convergence_delta: f64,
    pub max_epochs: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 0.2,
            batch_fraction: 0.08,
            pos_threshold: 0.5,
            hard_cutoff: HardCutoff::AvgNegativeDistance,
            learning_rate: 0.01,
            convergence_delta: 1e-4,
            max_epochs: 500,
            hidden_dim: 150,
            output_dim: 100,
            seed: 0x5eed_0004,
        }
    }
}

/// Relationship types stored in the knowledge graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    DocToColumn,
    DocToTable,
    SyntacticJoin,
    PkFk,
    Unionable,
    NameSim,
    NumericSim,
    SemanticSim,
}

impl Relation {
    pub const ALL: [Relation; 8] = [
        Relation::DocToColumn,
        Relation::DocToTable,
        Relation::SyntacticJoin,
        Relation::PkFk,
        Relation::Unionable,
        Relation::NameSim,
        Relation::NumericSim,
        Relation::SemanticSim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::DocToColumn => "doc_to_column",
            Relation::DocToTable => "doc_to_table",
            Relation::SyntacticJoin => "syntactic_join",
            Relation::PkFk => "pk_fk",
            Relation::Unionable => "unionable",
            Relation::NameSim => "name_sim",
            Relation::NumericSim => "numeric_sim",
            Relation::SemanticSim => "semantic_sim",
        }
    }
}

/// Admission rule for one relation type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    Threshold(f64),
    TopK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableCombiner {
    /// Table score is its best column score.
    Max,
    /// Mean of the three best column scores (sum of top-3 scaled into [0,1]).
    SumTop3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleWeights {
    pub name: f64,
    pub containment: f64,
    pub numeric: f64,
    pub semantic: f64,
}

impl Default for EnsembleWeights {
    fn default() -> Self {
        EnsembleWeights { name: 1.0, containment: 1.0, numeric: 1.0, semantic: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkgConfig {
    pub pkfk_containment_min: f64,
    pub pk_uniqueness: f64,
    pub pkfk_name_min: f64,
    pub min_pair_score: f64,
    pub per_column_k: usize,
    /// Candidate tables examined per unionability query.
    pub unionable_k: usize,
    pub join_k: usize,
    /// Column hits fetched per document before combining into tables.
    pub doc_column_hits: usize,
    pub table_combiner: TableCombiner,
    pub weights: EnsembleWeights,
    pub policy: BTreeMap<Relation, EdgeMode>,
}

impl Default for EkgConfig {
    fn default() -> Self {
        let mut policy = BTreeMap::new();
        for rel in Relation::ALL {
            let mode = match rel {
                // dense relations: a threshold would admit a large share of all pairs
                Relation::NameSim | Relation::NumericSim | Relation::SemanticSim => EdgeMode::TopK(10),
                _ => EdgeMode::Threshold(0.5),
            };
            policy.insert(rel, mode);
        }
        EkgConfig {
            pkfk_containment_min: 0.9,
            pk_uniqueness: 0.95,
            pkfk_name_min: 0.3,
            min_pair_score: 0.4,
            per_column_k: 10,
            unionable_k: 10,
            join_k: 10,
            doc_column_hits: 50,
            table_combiner: TableCombiner::Max,
            weights: EnsembleWeights::default(),
            policy,
        }
    }
}

impl EkgConfig {
    pub fn mode(&self, rel: Relation) -> EdgeMode {
        self.policy.get(&rel).copied().unwrap_or(EdgeMode::Threshold(0.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = LakeConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        for key in ["sample_fraction", "batch_fraction", "margin", "num_hashes", "gold_fraction", "hard_cutoff"] {
            assert!(text.contains(key), "missing {key}");
        }
        let back: LakeConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: LakeConfig = serde_json::from_str(r#"{"train": {"margin": 0.3}}"#).unwrap();
        assert_eq!(cfg.train.margin, 0.3);
        assert_eq!(cfg.train.batch_fraction, 0.08);
        assert_eq!(cfg.labels.sample_fraction, 0.1);
    }

    #[test]
    fn stage_seeds_differ() {
        let cfg = LakeConfig::default();
        assert_ne!(cfg.stage_seed("labels"), cfg.stage_seed("train"));
    }
}
