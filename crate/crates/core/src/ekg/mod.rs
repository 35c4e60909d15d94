//! The knowledge graph: typed, weighted relationships between DEs.

pub mod graph;
pub mod matching;
pub mod relations;
pub mod similarity;

use std::collections::BTreeMap;

pub use graph::{admit, combine, Ekg, EkgEdge, EkgNode};
pub use matching::{brute_force_matching, max_bipartite_matching, Matching};
pub use relations::{DocSpace, JoinHit, NameIndex, PkFkLink, RelationContext, TableHit, UnionHit};
pub use similarity::{name_similarity, numeric_overlap, ColumnPairScores};

use crate::config::{EdgeMode, Relation};
use crate::corpus::Corpus;
use crate::ids::{DeId, DeKind};
use crate::par::{self, Parallelism};
use crate::Result;

type Built = (Vec<EkgEdge>, Vec<(Relation, String)>);

fn record<T>(rel: Relation, r: Result<T>, fails: &mut Vec<(Relation, String)>) -> Option<T> {
    match r {
        Ok(x) => Some(x),
        Err(e) => {
            fails.push((rel, e.to_string()));
            None
        }
    }
}

fn bd(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// How many candidates a builder needs to fetch for a policy.
fn fetch(mode: EdgeMode) -> usize {
    match mode {
        EdgeMode::TopK(k) => k,
        EdgeMode::Threshold(_) => usize::MAX,
    }
}

pub fn doc_to_table_edge(doc: DeId, hit: &TableHit, ctx: &RelationContext<'_>) -> EkgEdge {
    let b = hit.columns.iter().map(|(c, s)| (format!("col:{c}"), *s)).collect();
    EkgEdge::new(doc, hit.table, Relation::DocToTable, b, ctx.cfg)
}

pub fn unionable_edge(table: DeId, hit: &UnionHit, ctx: &RelationContext<'_>) -> EkgEdge {
    let b = bd(&[("matching_total", hit.matching_total), ("source_columns", hit.source_columns as f64)]);
    EkgEdge::new(table, hit.table, Relation::Unionable, b, ctx.cfg)
}

pub fn pkfk_edge(link: &PkFkLink, ctx: &RelationContext<'_>) -> EkgEdge {
    let mut b = bd(&[("containment", link.containment), ("uniqueness", link.uniqueness), ("name_sim", link.name_sim)]);
    if let Some(o) = link.numeric_overlap {
        b.insert("numeric_overlap".into(), o);
    }
    EkgEdge::new(link.fk, link.pk, Relation::PkFk, b, ctx.cfg)
}

fn doc_edges(doc: DeId, ctx: &RelationContext<'_>) -> Built {
    let cfg = ctx.cfg;
    let mut fails = Vec::new();
    let mut edges = Vec::new();
    let Some(q) = record(Relation::DocToColumn, ctx.doc_vector(doc), &mut fails) else { return (edges, fails) };
    if q.iter().all(|x| *x == 0.0) {
        return (edges, fails);
    }
    if let Some(hits) = record(Relation::DocToColumn, ctx.doc_columns(&q, cfg.doc_column_hits), &mut fails) {
        let cand = hits.iter().map(|(c, s)| EkgEdge::new(doc, *c, Relation::DocToColumn, bd(&[("cosine", *s)]), cfg));
        edges.extend(admit(cand.collect(), cfg.mode(Relation::DocToColumn)));
    }
    if let Some(hits) = record(Relation::DocToTable, ctx.doc_to_table_vec(&q, usize::MAX), &mut fails) {
        let cand = hits.iter().map(|h| doc_to_table_edge(doc, h, ctx)).collect();
        edges.extend(admit(cand, cfg.mode(Relation::DocToTable)));
    }
    (edges, fails)
}

fn column_edges(col: DeId, ctx: &RelationContext<'_>, uniq: &BTreeMap<DeId, f64>, numeric: &[DeId]) -> Built {
    let cfg = ctx.cfg;
    let mut fails = Vec::new();
    let mut edges = Vec::new();
    let Some(me) = ctx.corpus.columns.get(&col) else { return (edges, fails) };
    let other = |id: DeId| ctx.corpus.columns.get(&id).is_some_and(|c| c.parent_table != me.parent_table);

    let mode = cfg.mode(Relation::SyntacticJoin);
    if let Some(hits) = record(Relation::SyntacticJoin, ctx.syntactic_joins(col, fetch(mode)), &mut fails) {
        let cand = hits
            .iter()
            .map(|h| {
                let b = bd(&[("containment_fwd", h.containment_fwd), ("containment_rev", h.containment_rev)]);
                EkgEdge::new(col, h.column, Relation::SyntacticJoin, b, cfg)
            })
            .collect();
        edges.extend(admit(cand, mode));
    }

    if let Some(links) = record(Relation::PkFk, ctx.pkfk_for(col, uniq), &mut fails) {
        edges.extend(admit(links.iter().map(|l| pkfk_edge(l, ctx)).collect(), cfg.mode(Relation::PkFk)));
    }

    let cand = ctx
        .names
        .similar(col, other)
        .into_iter()
        .map(|(d, s)| EkgEdge::new(col, d, Relation::NameSim, bd(&[("name_sim", s)]), cfg))
        .collect();
    edges.extend(admit(cand, cfg.mode(Relation::NameSim)));

    if let Some(stats) = ctx.store.get(col).and_then(|b| b.numeric.as_ref()) {
        let cand = numeric
            .iter()
            .filter(|&&d| d != col && other(d))
            .filter_map(|&d| {
                let o = numeric_overlap(stats, ctx.store.get(d)?.numeric.as_ref()?);
                Some(EkgEdge::new(col, d, Relation::NumericSim, bd(&[("numeric_sim", o)]), cfg))
            })
            .collect();
        edges.extend(admit(cand, cfg.mode(Relation::NumericSim)));
    }

    let mode = cfg.mode(Relation::SemanticSim);
    if let Some(v) = ctx.indexes.solo.vector(col) {
        let keep = |d: DeId| d != col && other(d);
        if let Some(hits) = record(Relation::SemanticSim, ctx.indexes.solo.query_filtered(v, fetch(mode), keep), &mut fails) {
            let cand = hits
                .iter()
                .map(|h| {
                    let s = ((h.score + 1.0) / 2.0).clamp(0.0, 1.0);
                    EkgEdge::new(col, h.de, Relation::SemanticSim, bd(&[("semantic_sim", s)]), cfg)
                })
                .collect();
            edges.extend(admit(cand, mode));
        }
    }
    (edges, fails)
}

fn table_edges(table: DeId, ctx: &RelationContext<'_>) -> Built {
    let mut fails = Vec::new();
    let mut edges = Vec::new();
    if let Some(hits) = record(Relation::Unionable, ctx.unionable_tables(table, usize::MAX), &mut fails) {
        let cand = hits.iter().map(|h| unionable_edge(table, h, ctx)).collect();
        edges.extend(admit(cand, ctx.cfg.mode(Relation::Unionable)));
    }
    (edges, fails)
}

pub fn nodes(corpus: &Corpus) -> Vec<EkgNode> {
    let mut out = Vec::with_capacity(corpus.tables.len() + corpus.columns.len() + corpus.docs.len());
    let name = |id: DeId| corpus.display_name(id).unwrap_or_default();
    out.extend(corpus.tables.keys().map(|&id| EkgNode { id, kind: DeKind::Table, name: name(id) }));
    out.extend(corpus.columns.keys().map(|&id| EkgNode { id, kind: DeKind::Column, name: name(id) }));
    out.extend(corpus.docs.keys().map(|&id| EkgNode { id, kind: DeKind::Document, name: name(id) }));
    out
}

/// Run every relation builder over all eligible DEs. Builders run in
/// parallel per source DE; failures are collected per relation.
pub fn materialize_ekg(ctx: &RelationContext<'_>, par: Parallelism) -> Ekg {
    enum Job {
        Doc(DeId),
        Col(DeId),
        Table(DeId),
    }
    let corpus = ctx.corpus;
    let uniq = ctx.uniqueness_map();
    let numeric: Vec<DeId> =
        corpus.columns.keys().copied().filter(|id| ctx.store.get(*id).is_some_and(|b| b.numeric.is_some())).collect();
    let mut jobs: Vec<Job> = corpus.docs.keys().map(|&d| Job::Doc(d)).collect();
    jobs.extend(corpus.columns.keys().map(|&c| Job::Col(c)));
    jobs.extend(corpus.tables.keys().map(|&t| Job::Table(t)));
    let built = par::map(&jobs, par, |job| match job {
        Job::Doc(d) => doc_edges(*d, ctx),
        Job::Col(c) => column_edges(*c, ctx, &uniq, &numeric),
        Job::Table(t) => table_edges(*t, ctx),
    });
    let mut edges = Vec::new();
    let mut failures: BTreeMap<Relation, Vec<String>> = BTreeMap::new();
    for (e, f) in built {
        edges.extend(e);
        for (rel, msg) in f {
            failures.entry(rel).or_default().push(msg);
        }
    }
    for (rel, msgs) in &failures {
        log::warn!("{} builder failed for {} sources", rel.as_str(), msgs.len());
    }
    Ekg::new(nodes(corpus), edges, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LakeConfig;
    use crate::corpus::CorpusBuilder;
    use crate::indexes::IndexSet;
    use crate::profiler::profile_corpus;

    fn build(tables: &[(&str, String)], docs: &[(&str, &str)], par: Parallelism) -> Ekg {
        let cfg = LakeConfig::default();
        let mut b = CorpusBuilder::new(cfg.corpus.clone());
        for (name, csv) in tables {
            b.add_table(&format!("tables/{name}.csv"), name, csv).unwrap();
        }
        for (i, (title, text)) in docs.iter().enumerate() {
            b.add_document(&format!("docs/{i}.txt"), title, "test", text).unwrap();
        }
        let corpus = b.finish(par);
        let store = profile_corpus(&corpus, &cfg.profile, par).unwrap();
        let indexes = IndexSet::build(&corpus, &store, &cfg.index).unwrap();
        let names = NameIndex::build(&corpus);
        let ctx = RelationContext { corpus: &corpus, store: &store, indexes: &indexes, names: &names, cfg: &cfg.ekg };
        materialize_ekg(&ctx, par)
    }

    fn lake() -> Vec<(&'static str, String)> {
        let mut drugs = String::from("drug_id,drug_name,dose\n");
        let mut trials = String::from("trial_name,drug_id,phase\n");
        for i in 0..60 {
            drugs.push_str(&format!("{},compound {i} inhibitor,{}\n", 500 + i, i * 5));
            trials.push_str(&format!("trial {i} study,{},{}\n", 500 + (i * 7) % 40, i % 4));
        }
        vec![("drugs", drugs), ("trials", trials)]
    }

    #[test]
    fn empty_lake_gives_empty_graph() {
        assert!(build(&[], &[], Parallelism::SEQUENTIAL).is_empty());
    }

    #[test]
    fn weights_replay_from_breakdown() {
        let docs = [("note", "compound inhibitor trial study with phase results")];
        let g = build(&lake(), &docs, Parallelism::SEQUENTIAL);
        let cfg = LakeConfig::default().ekg;
        assert!(g.has_relation(Relation::PkFk));
        assert!(g.has_relation(Relation::SyntacticJoin));
        for e in &g.edges {
            assert_eq!(e.weight, combine(e.relation, &e.breakdown, &cfg));
            assert!((0.0..=1.0).contains(&e.weight));
            assert_ne!(e.src, e.dst);
        }
        for e in g.edges.iter().filter(|e| e.relation == Relation::PkFk) {
            assert_eq!(g.nodes[&e.src].kind, DeKind::Column);
            assert!(g.nodes[&e.src].name.starts_with("trials."), "{}", g.nodes[&e.src].name);
        }
    }

    #[test]
    fn rebuild_is_identical_across_parallelism() {
        let docs = [("note", "compound inhibitor trial study")];
        let a = build(&lake(), &docs, Parallelism::SEQUENTIAL).to_jsonl().unwrap();
        let b = build(&lake(), &docs, Parallelism(4)).to_jsonl().unwrap();
        assert_eq!(a, b);
    }
}
