//! Benchmark runner: one query per ground-truth entry, metrics per k.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{mqcr, precision_recall_at_k, r_precision};
use super::synth::SyntheticLake;
use super::truth::{GroundTruth, Task};
use crate::config::LakeConfig;
use crate::corpus::Corpus;
use crate::ekg::DocSpace;
use crate::ids::DeId;
use crate::par::{self, Parallelism};
use crate::pipeline::{self, Workspace};
use crate::query::Engine;
use crate::weaklabel::{sample_pairs, GoldLabels};
use crate::{Error, Result};

/// What answers a query. `doc_space` only affects document tasks; `None`
/// means the joint space when one is built.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSystem {
    pub doc_space: Option<DocSpace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query: DeId,
    pub truth_size: usize,
    pub r_precision: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub task: Task,
    pub system: BenchSystem,
    pub k_list: Vec<usize>,
    pub per_k: Vec<KMetrics>,
    pub r_precision: f64,
    pub mqcr: f64,
    pub queries: Vec<QueryMetrics>,
    /// Wall time; written to a sidecar so the report itself is reproducible.
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl BenchmarkReport {
    pub fn precision_at(&self, k: usize) -> Option<f64> {
        self.per_k.iter().find(|m| m.k == k).map(|m| m.precision)
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.per_k.iter().find(|m| m.k == k).map(|m| m.recall)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::InvalidQuery(e.to_string());
        w.write_record(["query", "k", "precision", "recall", "r_precision"]).map_err(err)?;
        for q in &self.queries {
            for (i, k) in self.k_list.iter().enumerate() {
                w.write_record([
                    q.query.to_string(),
                    k.to_string(),
                    format!("{:.6}", q.precision[i]),
                    format!("{:.6}", q.recall[i]),
                    format!("{:.6}", q.r_precision),
                ])
                .map_err(err)?;
            }
        }
        for m in &self.per_k {
            w.write_record([
                "mean".to_string(),
                m.k.to_string(),
                format!("{:.6}", m.precision),
                format!("{:.6}", m.recall),
                format!("{:.6}", self.r_precision),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidQuery(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidQuery(e.to_string()))
    }

    /// `path` gets the JSON; the CSV and a `.timing.json` sidecar sit next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        std::fs::write(path.with_extension("csv"), self.to_csv()?)?;
        let timing = serde_json::json!({ "runtime_ms": self.runtime_ms, "queries": self.queries.len() });
        std::fs::write(timing_path(path), serde_json::to_vec_pretty(&timing)?)?;
        Ok(())
    }
}

pub fn timing_path(report: &Path) -> PathBuf {
    report.with_extension("timing.json")
}

/// Size of a DE for query/candidate ratios: distinct bag terms for
/// documents, distinct values for columns, the largest column for tables.
pub fn de_size(corpus: &Corpus, id: DeId) -> Option<f64> {
    if let Some(b) = corpus.bags.get(&id) {
        return Some(b.distinct_count as f64);
    }
    let distinct = |c: DeId| -> usize {
        corpus.columns.get(&c).map_or(0, |c| {
            c.non_empty_values().map(crate::text::normalize_value).collect::<BTreeSet<_>>().len()
        })
    };
    if corpus.columns.contains_key(&id) {
        return Some(distinct(id) as f64);
    }
    corpus.tables.get(&id).map(|t| t.column_ids.iter().map(|c| distinct(*c)).max().unwrap_or(0) as f64)
}

pub fn compute_mqcr(truth: &GroundTruth, corpus: &Corpus) -> Result<f64> {
    let mut links = Vec::new();
    for (q, c) in truth.pairs() {
        let qs = de_size(corpus, q).ok_or(Error::UnknownDe(q))?;
        let cs = de_size(corpus, c).ok_or(Error::UnknownDe(c))?;
        links.push((qs, cs));
    }
    mqcr(&links)
}

/// Ranked answers to one benchmark query, deepest first `depth`.
pub fn rank(engine: &Engine, task: Task, system: BenchSystem, query: DeId, depth: usize) -> Result<Vec<DeId>> {
    let ctx = engine.ctx();
    let space = system.doc_space.unwrap_or(ctx.doc_space());
    Ok(match task {
        Task::DocToTable => ctx.doc_to_table_in(space, query, depth)?.into_iter().map(|h| h.table).collect(),
        Task::DocToColumn => {
            let q = ctx.doc_vector_in(space, query)?;
            ctx.doc_columns_in(space, &q, depth)?.into_iter().map(|h| h.0).collect()
        }
        Task::SyntacticJoin => ctx.syntactic_joins(query, depth)?.into_iter().map(|h| h.column).collect(),
        Task::PkFk => {
            let uniq = ctx.uniqueness_map();
            ctx.pkfk_for(query, &uniq)?.into_iter().take(depth).map(|l| l.pk).collect()
        }
        Task::Unionable => ctx.unionable_tables(query, depth)?.into_iter().map(|h| h.table).collect(),
    })
}

pub fn run_benchmark(
    engine: &Engine,
    truth: &GroundTruth,
    k_list: &[usize],
    system: BenchSystem,
    par: Parallelism,
) -> Result<BenchmarkReport> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    if k_list.is_empty() || k_list.contains(&0) {
        return Err(Error::InvalidQuery("k_list must be nonempty with every k >= 1".into()));
    }
    let corpus = &engine.artifacts.corpus;
    truth.validate(corpus)?;
    let start = Instant::now();
    let entries: Vec<(&DeId, &BTreeSet<DeId>)> = truth.entries.iter().collect();
    let max_k = k_list.iter().copied().max().unwrap_or(1);
    let ranked = par::map(&entries, par, |(q, answers)| rank(engine, truth.task, system, **q, max_k.max(answers.len())));
    let mut queries = Vec::with_capacity(entries.len());
    for ((q, answers), r) in entries.iter().zip(ranked) {
        let r = r?;
        let mut precision = Vec::with_capacity(k_list.len());
        let mut recall = Vec::with_capacity(k_list.len());
        for &k in k_list {
            let (p, rc) = precision_recall_at_k(&r, answers, k)?;
            precision.push(p);
            recall.push(rc);
        }
        queries.push(QueryMetrics {
            query: **q,
            truth_size: answers.len(),
            r_precision: r_precision(&r, answers)?,
            precision,
            recall,
        });
    }
    let n = queries.len() as f64;
    let per_k = k_list
        .iter()
        .enumerate()
        .map(|(i, &k)| KMetrics {
            k,
            precision: queries.iter().map(|q| q.precision[i]).sum::<f64>() / n,
            recall: queries.iter().map(|q| q.recall[i]).sum::<f64>() / n,
        })
        .collect();
    Ok(BenchmarkReport {
        task: truth.task,
        system,
        k_list: k_list.to_vec(),
        per_k,
        r_precision: queries.iter().map(|q| q.r_precision).sum::<f64>() / n,
        mqcr: compute_mqcr(truth, corpus)?,
        queries,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Gold labels drawn from doc-to-column truth over the labeling sample.
pub fn gold_from_truth(corpus: &Corpus, cfg: &LakeConfig, truth: &GroundTruth) -> Result<GoldLabels> {
    let sample = sample_pairs(corpus, cfg.labels.sample_fraction, cfg.stage_seed("sample"))?;
    Ok(GoldLabels::from_truth(
        &sample,
        &truth.pairs(),
        cfg.labels.gold_fraction,
        cfg.labels.min_gold_pairs,
        cfg.stage_seed("gold"),
    ))
}

/// Write a generated lake under `lake_dir`, run every stage into `ws_dir`
/// with gold drawn from the planted doc-to-column links, and open it.
pub fn build_planted(
    lake: &SyntheticLake,
    lake_dir: &Path,
    ws_dir: &Path,
    cfg: &LakeConfig,
    par: Parallelism,
) -> Result<Engine> {
    lake.write(lake_dir)?;
    let ws = Workspace::new(ws_dir);
    let corpus = pipeline::ingest(&ws, lake_dir, cfg, par)?;
    let gold = match lake.truth.get(&Task::DocToColumn).filter(|g| !g.is_empty()) {
        Some(t) => Some(gold_from_truth(&corpus, cfg, t)?),
        None => None,
    };
    pipeline::profile(&ws, cfg, par)?;
    pipeline::index(&ws, cfg)?;
    pipeline::labels(&ws, cfg, gold.as_ref(), par)?;
    pipeline::train(&ws, cfg, par)?;
    pipeline::ekg(&ws, cfg, par)?;
    pipeline::open_engine(&ws)
}

/// Reports for several tasks keyed by task name.
pub fn run_all(
    engine: &Engine,
    truths: &BTreeMap<Task, GroundTruth>,
    k_list: &[usize],
    system: BenchSystem,
    par: Parallelism,
) -> Result<BTreeMap<Task, BenchmarkReport>> {
    let mut out = BTreeMap::new();
    for (task, g) in truths {
        if !g.is_empty() {
            out.insert(*task, run_benchmark(engine, g, k_list, system, par)?);
        }
    }
    Ok(out)
}
