//! Discovery primitives over the built artifacts. Every primitive is
//! read-only and returns a [`Drs`] carrying its provenance.

pub mod drs;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use drs::{drs_combine, min_max, CombineOp, Drs, DrsItem, OpRecord};

use crate::config::{LakeConfig, Relation};
use crate::corpus::{ColumnType, Corpus, TaskTag};
use crate::ekg::{admit, unionable_edge, Ekg, EkgEdge, EkgNode, NameIndex, RelationContext};
use crate::ids::{DeId, DeKind};
use crate::indexes::{IndexSet, TextIndex};
use crate::jointrep::JointModel;
use crate::profiler::{ProfileStore, Profiler};
use crate::{text, Error, Result};

pub const OPS: [&str; 7] =
    ["content_search", "catalog_search", "crossModal_search", "pkfk", "unionable", "neighbors", "drs_combine"];

fn default_k() -> usize {
    10
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    Text,
    Tabular,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentSearch {
    pub value: String,
    #[serde(default)]
    pub mode: SearchMode,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSearch {
    pub value: String,
    #[serde(default = "default_k")]
    pub k: usize,
}

/// `value` is a document id, or free text embedded on the fly. Free text
/// may carry the title and source a stored document would have.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossModalSearch {
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default = "default_k")]
    pub topn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableQuery {
    pub value: DeId,
    #[serde(default = "default_k")]
    pub topn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Neighbors {
    pub de: DeId,
    #[serde(default)]
    pub relations: Vec<Relation>,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Combine {
    pub a: Drs,
    pub b: Drs,
    pub op: CombineOp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    ContentSearch(ContentSearch),
    CatalogSearch(CatalogSearch),
    CrossModalSearch(CrossModalSearch),
    PkFk(TableQuery),
    Unionable(TableQuery),
    Neighbors(Neighbors),
    Combine(Box<Combine>),
}

fn params<T: DeserializeOwned>(op: &str, v: serde_json::Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::InvalidQuery(format!("{op}: {e}")))
}

fn positive(op: &str, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidQuery(format!("{op}: k must be at least 1")));
    }
    Ok(())
}

impl Query {
    /// Parse an operation name and its JSON parameters.
    pub fn parse(op: &str, v: serde_json::Value) -> Result<Self> {
        let q = match op {
            "content_search" => Query::ContentSearch(params(op, v)?),
            "catalog_search" => Query::CatalogSearch(params(op, v)?),
            "crossModal_search" => Query::CrossModalSearch(params(op, v)?),
            "pkfk" => Query::PkFk(params(op, v)?),
            "unionable" => Query::Unionable(params(op, v)?),
            "neighbors" => Query::Neighbors(params(op, v)?),
            "drs_combine" => Query::Combine(Box::new(params(op, v)?)),
            other => return Err(Error::InvalidQuery(format!("unknown operation {other:?}"))),
        };
        let k = match &q {
            Query::ContentSearch(p) => p.k,
            Query::CatalogSearch(p) => p.k,
            Query::CrossModalSearch(p) => p.topn,
            Query::PkFk(p) | Query::Unionable(p) => p.topn,
            Query::Neighbors(p) => p.k,
            Query::Combine(_) => 1,
        };
        positive(op, k)?;
        Ok(q)
    }

    pub fn op(&self) -> &'static str {
        match self {
            Query::ContentSearch(_) => OPS[0],
            Query::CatalogSearch(_) => OPS[1],
            Query::CrossModalSearch(_) => OPS[2],
            Query::PkFk(_) => OPS[3],
            Query::Unionable(_) => OPS[4],
            Query::Neighbors(_) => OPS[5],
            Query::Combine(_) => OPS[6],
        }
    }

    pub fn params(&self) -> serde_json::Value {
        let v = match self {
            Query::ContentSearch(p) => serde_json::to_value(p),
            Query::CatalogSearch(p) => serde_json::to_value(p),
            Query::CrossModalSearch(p) => serde_json::to_value(p),
            Query::PkFk(p) | Query::Unionable(p) => serde_json::to_value(p),
            Query::Neighbors(p) => serde_json::to_value(p),
            Query::Combine(p) => serde_json::to_value(&**p),
        };
        v.unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub id: DeId,
    pub kind: DeKind,
    pub name: String,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_table: Option<DeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub op: String,
    pub drs: Drs,
    pub items: Vec<ItemView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnView {
    pub id: DeId,
    pub name: String,
    pub inferred_type: ColumnType,
    pub tags: BTreeSet<TaskTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeDetail {
    Table { id: DeId, name: String, path: String, row_count: usize, columns: Vec<ColumnView> },
    Column { id: DeId, name: String, table: DeId, table_name: String, column: ColumnView, sample_values: Vec<String> },
    Document { id: DeId, title: String, source: String, path: String, parent_doc: Option<DeId>, snippet: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub center: DeId,
    pub depth: usize,
    pub nodes: Vec<EkgNode>,
    pub edges: Vec<EkgEdge>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LakeSummary {
    pub tables: usize,
    pub columns: usize,
    pub documents: usize,
    pub edges: BTreeMap<String, usize>,
    pub joint_model: bool,
    pub fingerprints: BTreeMap<String, String>,
}

const SNIPPET_CHARS: usize = 240;
const SAMPLE_VALUES: usize = 10;
const NEIGHBORHOOD_MAX_NODES: usize = 500;

fn snippet(text: &str) -> String {
    let mut s: String = text.chars().take(SNIPPET_CHARS).collect();
    if text.chars().count() > SNIPPET_CHARS {
        s.push('…');
    }
    s
}

/// Everything a query needs, loaded once.
pub struct Artifacts {
    pub config: LakeConfig,
    pub corpus: Corpus,
    pub store: ProfileStore,
    pub indexes: IndexSet,
    pub ekg: Option<Ekg>,
    pub model: Option<JointModel>,
    pub fingerprints: BTreeMap<String, String>,
}

pub struct Engine {
    pub artifacts: Artifacts,
    names: NameIndex,
    profiler: Profiler,
}

impl Engine {
    pub fn new(artifacts: Artifacts) -> Result<Self> {
        let names = NameIndex::build(&artifacts.corpus);
        let profiler = Profiler::new(&artifacts.config.profile)?;
        Ok(Engine { artifacts, names, profiler })
    }

    pub fn ctx(&self) -> RelationContext<'_> {
        let a = &self.artifacts;
        RelationContext { corpus: &a.corpus, store: &a.store, indexes: &a.indexes, names: &self.names, cfg: &a.config.ekg }
    }

    fn corpus(&self) -> &Corpus {
        &self.artifacts.corpus
    }

    fn ekg(&self) -> Result<&Ekg> {
        self.artifacts.ekg.as_ref().ok_or(Error::IndexMissing("ekg"))
    }

    fn expect_kind(&self, id: DeId, kind: DeKind) -> Result<()> {
        match self.corpus().kind_of(id) {
            Some(k) if k == kind => Ok(()),
            Some(k) => Err(Error::WrongKind { id, expected: kind.as_str(), actual: k.as_str() }),
            None => Err(Error::UnknownDe(id)),
        }
    }

    pub fn execute(&self, q: &Query) -> Result<Drs> {
        if let Query::Combine(c) = q {
            return Ok(drs_combine(&c.a, &c.b, c.op));
        }
        let items = match q {
            Query::ContentSearch(p) => self.content_search(p)?,
            Query::CatalogSearch(p) => self.catalog_search(p)?,
            Query::CrossModalSearch(p) => self.cross_modal_search(p)?,
            Query::PkFk(p) => self.pkfk(p)?,
            Query::Unionable(p) => self.unionable(p)?,
            Query::Neighbors(p) => self.neighbors(p)?,
            Query::Combine(_) => unreachable!(),
        };
        Ok(Drs::new(items, OpRecord::new(q.op(), q.params(), Vec::new()), Vec::new()))
    }

    pub fn run(&self, op: &str, params: serde_json::Value) -> Result<QueryResponse> {
        let q = Query::parse(op, params)?;
        let drs = self.execute(&q)?;
        Ok(self.respond(q.op(), drs))
    }

    pub fn respond(&self, op: &str, drs: Drs) -> QueryResponse {
        let items = drs.items.iter().filter_map(|i| self.view(i.id, i.score)).collect();
        QueryResponse { op: op.to_string(), drs, items }
    }

    fn view(&self, id: DeId, score: f64) -> Option<ItemView> {
        let c = self.corpus();
        let kind = c.kind_of(id)?;
        let name = c.display_name(id).unwrap_or_default();
        let parent_table = c.columns.get(&id).map(|col| col.parent_table);
        let snippet = c.docs.get(&id).map(|d| snippet(&d.raw_text));
        Some(ItemView { id, kind, name, score, parent_table, snippet })
    }

    /// Re-execute a result set's provenance chain.
    pub fn replay(&self, drs: &Drs) -> Result<Drs> {
        let mut done: BTreeMap<String, Drs> = BTreeMap::new();
        for r in &drs.provenance {
            let out = if r.op == "drs_combine" {
                let parent = |i: usize| {
                    r.parents.get(i).and_then(|p| done.get(p)).ok_or_else(|| Error::InvalidQuery(format!("dangling parent in {}", r.id)))
                };
                let op: CombineOp = params("drs_combine", r.params["op"].clone())?;
                drs_combine(parent(0)?, parent(1)?, op)
            } else {
                self.execute(&Query::parse(&r.op, r.params.clone())?)?
            };
            done.insert(r.id.clone(), out);
        }
        done.remove(&drs.id).ok_or_else(|| Error::InvalidQuery("empty provenance".into()))
    }

    fn text_hits(index: &TextIndex, value: &str, k: usize, keep: impl Fn(DeId, DeKind) -> bool) -> Vec<DrsItem> {
        let terms = text::analyze(value);
        index.search_filtered(&terms, k, keep).into_iter().map(|h| DrsItem { id: h.de, score: h.score }).collect()
    }

    pub fn content_search(&self, p: &ContentSearch) -> Result<Vec<DrsItem>> {
        let index = &self.artifacts.indexes.content;
        let scope = move |kind: DeKind| match p.mode {
            SearchMode::Text => kind == DeKind::Document,
            SearchMode::Tabular => kind == DeKind::Column,
            SearchMode::Both => true,
        };
        if !index.kinds.iter().any(|k| scope(*k)) {
            return Err(Error::IndexMissing("content"));
        }
        Ok(Self::text_hits(index, &p.value, p.k, |_, kind| scope(kind)))
    }

    pub fn catalog_search(&self, p: &CatalogSearch) -> Result<Vec<DrsItem>> {
        let index = &self.artifacts.indexes.metadata;
        if index.is_empty() {
            return Err(Error::IndexMissing("metadata"));
        }
        Ok(Self::text_hits(index, &p.value, p.k, |_, _| true))
    }

    /// Joint embedding of free text, through the same preprocessing and
    /// profiling path as stored documents.
    pub fn embed_text(&self, text: &str, title: &str, source: &str) -> Result<Vec<f64>> {
        let model = self.artifacts.model.as_ref().ok_or(Error::ModelMissing)?;
        let bag = self.corpus().preprocess_query_text(text);
        let meta = text::analyze(&format!("{title} {source}")).into_iter().collect();
        let bundle = self.profiler.profile_text(bag.owner, &bag, meta);
        let enc = bundle.solo.map(|s| s.input_encoding()).ok_or(Error::ModelMissing)?;
        if enc.len() != model.input_dim {
            return Err(Error::DimensionMismatch { expected: model.input_dim, got: enc.len() });
        }
        Ok(model.embed(&enc))
    }

    pub fn cross_modal_search(&self, p: &CrossModalSearch) -> Result<Vec<DrsItem>> {
        if self.artifacts.model.is_none() || self.artifacts.indexes.joint.is_none() {
            return Err(Error::ModelMissing);
        }
        let ctx = self.ctx();
        let hits = match p.value.parse::<DeId>() {
            Ok(id) => {
                self.expect_kind(id, DeKind::Document)?;
                ctx.doc_to_table(id, p.topn)?
            }
            Err(_) => {
                if p.value.trim().is_empty() {
                    return Err(Error::InvalidQuery("crossModal_search: empty text".into()));
                }
                let title = p.title.as_deref().unwrap_or("");
                let source = p.source.as_deref().unwrap_or("");
                ctx.doc_to_table_vec(&self.embed_text(&p.value, title, source)?, p.topn)?
            }
        };
        Ok(hits.into_iter().map(|h| DrsItem { id: h.table, score: h.score }).collect())
    }

    pub fn pkfk(&self, p: &TableQuery) -> Result<Vec<DrsItem>> {
        self.expect_kind(p.value, DeKind::Table)?;
        let ekg = self.ekg()?;
        let c = self.corpus();
        let mut best: BTreeMap<DeId, f64> = BTreeMap::new();
        for col in &c.tables[&p.value].column_ids {
            let out = ekg.out_edges(*col).map(|e| (e.dst, e));
            let inc = ekg.in_edges(*col).map(|e| (e.src, e));
            for (other, e) in out.chain(inc) {
                if e.relation != Relation::PkFk {
                    continue;
                }
                let Some(t) = c.columns.get(&other).map(|x| x.parent_table) else { continue };
                if t != p.value {
                    let w = best.entry(t).or_insert(0.0);
                    *w = w.max(e.weight);
                }
            }
        }
        Ok(top(best.into_iter().map(|(id, score)| DrsItem { id, score }).collect(), p.topn))
    }

    /// Materialized edges when the graph is built, otherwise recomputed
    /// under the same admission rule.
    pub fn unionable(&self, p: &TableQuery) -> Result<Vec<DrsItem>> {
        self.expect_kind(p.value, DeKind::Table)?;
        let edges: Vec<EkgEdge> = match &self.artifacts.ekg {
            Some(g) => g.out_edges(p.value).filter(|e| e.relation == Relation::Unionable).cloned().collect(),
            None => self.unionable_recompute(p.value)?,
        };
        Ok(top(edges.into_iter().map(|e| DrsItem { id: e.dst, score: e.weight }).collect(), p.topn))
    }

    pub fn unionable_recompute(&self, table: DeId) -> Result<Vec<EkgEdge>> {
        let ctx = self.ctx();
        let hits = ctx.unionable_tables(table, usize::MAX)?;
        let edges = hits.iter().map(|h| unionable_edge(table, h, &ctx)).collect();
        Ok(admit(edges, ctx.cfg.mode(Relation::Unionable)))
    }

    pub fn neighbors(&self, p: &Neighbors) -> Result<Vec<DrsItem>> {
        if self.corpus().kind_of(p.de).is_none() {
            return Err(Error::UnknownDe(p.de));
        }
        let n = self.ekg()?.neighbors(p.de, &p.relations);
        Ok(top(n.into_iter().map(|(id, score, _)| DrsItem { id, score }).collect(), p.k))
    }

    pub fn detail(&self, id: DeId) -> Result<DeDetail> {
        let c = self.corpus();
        let col_view = |id: &DeId| {
            let col = &c.columns[id];
            ColumnView { id: *id, name: col.name.clone(), inferred_type: col.inferred_type, tags: col.tags.clone() }
        };
        if let Some(t) = c.tables.get(&id) {
            return Ok(DeDetail::Table {
                id,
                name: t.name.clone(),
                path: t.path.clone(),
                row_count: t.row_count,
                columns: t.column_ids.iter().map(col_view).collect(),
            });
        }
        if let Some(col) = c.columns.get(&id) {
            let table_name = c.tables.get(&col.parent_table).map(|t| t.name.clone()).unwrap_or_default();
            let mut seen = BTreeSet::new();
            let sample_values =
                col.non_empty_values().filter(|v| seen.insert(*v)).take(SAMPLE_VALUES).map(str::to_string).collect();
            return Ok(DeDetail::Column {
                id,
                name: col.name.clone(),
                table: col.parent_table,
                table_name,
                column: col_view(&id),
                sample_values,
            });
        }
        if let Some(d) = c.docs.get(&id) {
            return Ok(DeDetail::Document {
                id,
                title: d.title.clone(),
                source: d.source.clone(),
                path: d.path.clone(),
                parent_doc: d.parent_doc,
                snippet: snippet(&d.raw_text),
            });
        }
        Err(Error::UnknownDe(id))
    }

    /// Breadth-first subgraph around a DE, following edges both ways.
    pub fn neighborhood(&self, center: DeId, depth: usize) -> Result<Neighborhood> {
        let ekg = self.ekg()?;
        if self.corpus().kind_of(center).is_none() {
            return Err(Error::UnknownDe(center));
        }
        let mut seen = BTreeSet::from([center]);
        let mut queue = VecDeque::from([(center, 0usize)]);
        let mut truncated = false;
        while let Some((id, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for e in ekg.out_edges(id).chain(ekg.in_edges(id)) {
                let other = if e.src == id { e.dst } else { e.src };
                if seen.contains(&other) {
                    continue;
                }
                if seen.len() >= NEIGHBORHOOD_MAX_NODES {
                    truncated = true;
                    break;
                }
                seen.insert(other);
                queue.push_back((other, d + 1));
            }
        }
        let nodes = seen.iter().filter_map(|id| ekg.nodes.get(id).cloned()).collect();
        let edges = ekg.edges.iter().filter(|e| seen.contains(&e.src) && seen.contains(&e.dst)).cloned().collect();
        Ok(Neighborhood { center, depth, nodes, edges, truncated })
    }

    pub fn summary(&self) -> LakeSummary {
        let c = self.corpus();
        let edges = match &self.artifacts.ekg {
            Some(g) => Relation::ALL.iter().map(|r| (r.as_str().to_string(), g.count(*r))).collect(),
            None => BTreeMap::new(),
        };
        LakeSummary {
            tables: c.tables.len(),
            columns: c.columns.len(),
            documents: c.docs.len(),
            edges,
            joint_model: self.artifacts.model.is_some(),
            fingerprints: self.artifacts.fingerprints.clone(),
        }
    }
}

fn top(mut items: Vec<DrsItem>, k: usize) -> Vec<DrsItem> {
    drs::sort_items(&mut items);
    items.truncate(k);
    items
}
