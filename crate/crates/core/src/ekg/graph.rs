//! Edges, admission policy and the persisted graph.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{EdgeMode, EkgConfig, Relation, TableCombiner};
use crate::ids::{DeId, DeKind};
use crate::indexes::rank_order;
use crate::{Error, Result};

pub const NODES_FILE: &str = "nodes.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EkgEdge {
    pub src: DeId,
    pub dst: DeId,
    pub relation: Relation,
    pub weight: f64,
    pub breakdown: BTreeMap<String, f64>,
}

impl EkgEdge {
    /// The weight is always derived from the breakdown.
    pub fn new(src: DeId, dst: DeId, relation: Relation, breakdown: BTreeMap<String, f64>, cfg: &EkgConfig) -> Self {
        let weight = combine(relation, &breakdown, cfg);
        EkgEdge { src, dst, relation, weight, breakdown }
    }
}

fn get(b: &BTreeMap<String, f64>, key: &str) -> f64 {
    b.get(key).copied().unwrap_or(0.0)
}

/// Per-relation combiner from signal scores to an edge weight in [0, 1].
pub fn combine(relation: Relation, b: &BTreeMap<String, f64>, cfg: &EkgConfig) -> f64 {
    let w = match relation {
        Relation::DocToColumn => get(b, "cosine").max(0.0),
        Relation::DocToTable => {
            let mut cols: Vec<f64> = b.iter().filter(|(k, _)| k.starts_with("col:")).map(|(_, v)| *v).collect();
            cols.sort_by(|x, y| y.total_cmp(x));
            match cfg.table_combiner {
                TableCombiner::Max => cols.first().copied().unwrap_or(0.0),
                TableCombiner::SumTop3 => cols.iter().take(3).sum::<f64>() / 3.0,
            }
        }
        Relation::SyntacticJoin => get(b, "containment_fwd").max(get(b, "containment_rev")),
        Relation::PkFk => get(b, "containment") * get(b, "uniqueness") * get(b, "name_sim"),
        Relation::Unionable => {
            let n = get(b, "source_columns");
            if n > 0.0 {
                get(b, "matching_total") / n
            } else {
                0.0
            }
        }
        Relation::NameSim => get(b, "name_sim"),
        Relation::NumericSim => get(b, "numeric_sim"),
        Relation::SemanticSim => get(b, "semantic_sim"),
    };
    w.clamp(0.0, 1.0)
}

/// Apply an admission rule to the candidate edges of one source.
pub fn admit(mut edges: Vec<EkgEdge>, mode: EdgeMode) -> Vec<EkgEdge> {
    edges.sort_by(|a, b| rank_order((a.weight, a.dst), (b.weight, b.dst)));
    match mode {
        EdgeMode::Threshold(eps) => edges.retain(|e| e.weight >= eps && e.weight > 0.0),
        EdgeMode::TopK(k) => {
            edges.retain(|e| e.weight > 0.0);
            edges.truncate(k);
        }
    }
    edges
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EkgNode {
    pub id: DeId,
    pub kind: DeKind,
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ekg {
    pub nodes: BTreeMap<DeId, EkgNode>,
    /// Sorted by (src, relation, dst).
    pub edges: Vec<EkgEdge>,
    /// Builder failures, per relation.
    pub failures: BTreeMap<Relation, Vec<String>>,
    out_adj: BTreeMap<DeId, Vec<usize>>,
    in_adj: BTreeMap<DeId, Vec<usize>>,
}

impl Ekg {
    pub fn new(nodes: Vec<EkgNode>, mut edges: Vec<EkgEdge>, failures: BTreeMap<Relation, Vec<String>>) -> Self {
        edges.sort_by_key(|a| (a.src, a.relation, a.dst));
        edges.dedup_by(|a, b| (a.src, a.relation, a.dst) == (b.src, b.relation, b.dst));
        let mut out_adj: BTreeMap<DeId, Vec<usize>> = BTreeMap::new();
        let mut in_adj: BTreeMap<DeId, Vec<usize>> = BTreeMap::new();
        for (i, e) in edges.iter().enumerate() {
            out_adj.entry(e.src).or_default().push(i);
            in_adj.entry(e.dst).or_default().push(i);
        }
        Ekg { nodes: nodes.into_iter().map(|n| (n.id, n)).collect(), edges, failures, out_adj, in_adj }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn out_edges(&self, id: DeId) -> impl Iterator<Item = &EkgEdge> {
        self.out_adj.get(&id).into_iter().flatten().map(|&i| &self.edges[i])
    }

    pub fn in_edges(&self, id: DeId) -> impl Iterator<Item = &EkgEdge> {
        self.in_adj.get(&id).into_iter().flatten().map(|&i| &self.edges[i])
    }

    pub fn has_relation(&self, rel: Relation) -> bool {
        self.edges.iter().any(|e| e.relation == rel)
    }

    pub fn count(&self, rel: Relation) -> usize {
        self.edges.iter().filter(|e| e.relation == rel).count()
    }

    /// Neighbors through either edge direction, best weight per neighbor,
    /// ranked. An empty filter means every relation.
    pub fn neighbors(&self, id: DeId, relations: &[Relation]) -> Vec<(DeId, f64, Relation)> {
        let wanted = |r: Relation| relations.is_empty() || relations.contains(&r);
        let mut best: BTreeMap<DeId, (f64, Relation)> = BTreeMap::new();
        let out = self.out_edges(id).map(|e| (e.dst, e));
        let inc = self.in_edges(id).map(|e| (e.src, e));
        for (other, e) in out.chain(inc) {
            if other == id || !wanted(e.relation) {
                continue;
            }
            let slot = best.entry(other).or_insert((f64::NEG_INFINITY, e.relation));
            if e.weight > slot.0 {
                *slot = (e.weight, e.relation);
            }
        }
        let mut v: Vec<(DeId, f64, Relation)> = best.into_iter().map(|(d, (w, r))| (d, w, r)).collect();
        v.sort_by(|a, b| rank_order((a.1, a.0), (b.1, b.0)));
        v
    }

    pub fn to_jsonl(&self) -> Result<(Vec<u8>, Vec<u8>)> {
        let mut nodes = Vec::new();
        for n in self.nodes.values() {
            serde_json::to_writer(&mut nodes, n)?;
            nodes.push(b'\n');
        }
        let mut edges = Vec::new();
        for e in &self.edges {
            serde_json::to_writer(&mut edges, e)?;
            edges.push(b'\n');
        }
        Ok((nodes, edges))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let (nodes, edges) = self.to_jsonl()?;
        std::fs::File::create(dir.join(NODES_FILE))?.write_all(&nodes)?;
        std::fs::File::create(dir.join(EDGES_FILE))?.write_all(&edges)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let nodes = read_lines::<EkgNode>(&dir.join(NODES_FILE))?;
        let edges = read_lines::<EkgEdge>(&dir.join(EDGES_FILE))?;
        Ok(Ekg::new(nodes, edges, BTreeMap::new()))
    }
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::artifact(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::artifact(path, format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}
