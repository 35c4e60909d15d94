//! Seeded synthetic lakes with planted relationships and their ground truth.
//!
//! Base tables each own a topic vocabulary that fills their text columns.
//! Documents draw most words from one table's vocabulary. Foreign keys are
//! columns sampled from another table's key; unionable families are
//! projections and selections of a base table with optional renaming.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::truth::{GroundTruth, Task};
use crate::config::CorpusConfig;
use crate::corpus::{Corpus, CorpusBuilder, Manifest, ManifestEntry};
use crate::ids::{DeId, DeKind};
use crate::par::Parallelism;
use crate::{text, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticLakeSpec {
    pub seed: u64,
    pub n_tables: usize,
    /// Inclusive row-count range of base tables.
    pub rows: [usize; 2],
    pub n_docs: usize,
    /// Topic words per base table.
    pub vocab_size: usize,
    /// Size of a vocabulary pool shared by all tables.
    pub shared_pool: usize,
    /// Words of each table's vocabulary drawn from the shared pool.
    pub shared_words: usize,
    /// Free-text columns per base table, at most 6.
    pub text_columns: usize,
    pub distractor_vocab: usize,
    /// Inclusive word-count range of documents.
    pub doc_words: [usize; 2],
    /// Share of a planted document's words drawn from its table's vocabulary.
    pub topic_share: f64,
    /// Share of documents whose title names their table's entity; the rest
    /// carry a generic title.
    pub title_signal: f64,
    pub planted_fks: usize,
    pub unionable_families: usize,
    /// Derived tables per family.
    pub family_size: usize,
    /// Probability that a derived table renames a column.
    pub rename_noise: f64,
    /// Share of foreign-key cells replaced by keys absent from the target.
    pub noise_rate: f64,
}

impl Default for SyntheticLakeSpec {
    fn default() -> Self {
        SyntheticLakeSpec {
            seed: 7,
            n_tables: 50,
            rows: [100, 200],
            n_docs: 300,
            vocab_size: 30,
            shared_pool: 0,
            shared_words: 0,
            text_columns: 2,
            distractor_vocab: 500,
            doc_words: [60, 150],
            topic_share: 0.8,
            title_signal: 1.0,
            planted_fks: 10,
            unionable_families: 5,
            family_size: 2,
            rename_noise: 0.2,
            noise_rate: 0.0,
        }
    }
}

impl SyntheticLakeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_tables == 0 {
            return bad("n_tables must be at least 1");
        }
        if self.rows[0] == 0 || self.rows[0] > self.rows[1] {
            return bad("rows must be a nonempty range of positive counts");
        }
        if self.doc_words[0] == 0 || self.doc_words[0] > self.doc_words[1] || self.doc_words[1] > 500 {
            return bad("doc_words must be a nonempty range within 1..=500");
        }
        if self.text_columns == 0 || self.text_columns > TEXT_COLUMNS.len() {
            return bad("text_columns must be within 1..=6");
        }
        if self.shared_words > self.shared_pool || self.shared_words >= self.vocab_size {
            return bad("shared_words must fit in both the pool and the vocabulary");
        }
        if self.vocab_size < 4 {
            return bad("vocab_size must be at least 4");
        }
        if !(0.0..=1.0).contains(&self.topic_share)
            || !(0.0..=1.0).contains(&self.rename_noise)
            || !(0.0..=1.0).contains(&self.title_signal)
            || !(0.0..=1.0).contains(&self.noise_rate)
        {
            return bad("shares and noise rates must lie in [0, 1]");
        }
        if self.topic_share < 1.0 && self.distractor_vocab == 0 && self.n_docs > 0 {
            return bad("distractor_vocab must be positive when topic_share < 1");
        }
        if self.planted_fks > self.n_tables * self.n_tables.saturating_sub(1) {
            return bad("more planted foreign keys than ordered table pairs");
        }
        if self.unionable_families > self.n_tables {
            return bad("more unionable families than base tables");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTable {
    pub path: String,
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SynthTable {
    pub fn id(&self) -> DeId {
        DeId::derive(DeKind::Table, &self.path, &self.name)
    }

    pub fn column_id(&self, header: &str) -> DeId {
        DeId::derive(DeKind::Column, &self.path, header)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::InvalidSpec(e.to_string());
        w.write_record(&self.headers).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidSpec(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidSpec(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDoc {
    pub path: String,
    pub title: String,
    pub source: String,
    pub text: String,
}

impl SynthDoc {
    /// Documents are short enough to stay a single DE.
    pub fn id(&self) -> DeId {
        DeId::derive(DeKind::Document, &self.path, "0")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLake {
    pub spec: SyntheticLakeSpec,
    pub tables: Vec<SynthTable>,
    pub docs: Vec<SynthDoc>,
    pub truth: BTreeMap<Task, GroundTruth>,
}

const TEXT_COLUMNS: [(&str, usize); 6] =
    [("name", 2), ("note", 3), ("remark", 2), ("label", 2), ("summary", 4), ("title", 2)];
const MEASURES: [&str; 8] = ["amount", "level", "score", "count", "weight", "price", "rate", "volume"];
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const FINALS: &[u8] = b"kmnptxz";

/// Distinct pronounceable words whose stems are distinct too.
struct Words {
    seen: HashSet<String>,
}

impl Words {
    fn next(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let syllables = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(rng).unwrap_or(&b'k') as char);
                w.push(*VOWELS.choose(rng).unwrap_or(&b'a') as char);
            }
            w.push(*FINALS.choose(rng).unwrap_or(&b'k') as char);
            let stem = text::stem(&w);
            if !text::is_stopword(&w) && self.seen.insert(stem) {
                return w;
            }
        }
    }
}

struct Base {
    entity: String,
    vocab: Vec<String>,
    text_columns: Vec<String>,
}

fn range(rng: &mut ChaCha8Rng, r: [usize; 2]) -> usize {
    rng.random_range(r[0]..=r[1])
}

pub fn generate_synthetic_lake(spec: &SyntheticLakeSpec) -> Result<SyntheticLake> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut words = Words { seen: HashSet::new() };
    let mut tables = Vec::new();
    let mut bases = Vec::new();

    let pool: Vec<String> = (0..spec.shared_pool).map(|_| words.next(&mut rng)).collect();
    for i in 0..spec.n_tables {
        let entity = words.next(&mut rng);
        let mut vocab: Vec<String> = (spec.shared_words..spec.vocab_size).map(|_| words.next(&mut rng)).collect();
        vocab.extend(pool.choose_multiple(&mut rng, spec.shared_words).cloned());
        let grades: Vec<String> = (0..3).map(|_| words.next(&mut rng)).collect();
        let n = range(&mut rng, spec.rows);
        let mut measures = MEASURES.to_vec();
        measures.shuffle(&mut rng);
        let lo: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..1000.0)).collect();
        let width: Vec<f64> = (0..2).map(|_| rng.random_range(10.0..100.0)).collect();
        let texts = &TEXT_COLUMNS[..spec.text_columns];
        let mut headers = vec![format!("{entity}_id")];
        headers.extend(texts.iter().map(|(h, _)| format!("{entity}_{h}")));
        headers.extend([measures[0].to_string(), measures[1].to_string(), format!("{entity}_grade")]);
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            let mut row = vec![key(i, r)];
            for (_, words) in texts {
                let cell: Vec<&str> = (0..*words).map(|_| vocab.choose(&mut rng).map_or("", String::as_str)).collect();
                row.push(cell.join(" "));
            }
            row.push(format!("{:.2}", lo[0] + rng.random_range(0.0..width[0])));
            row.push(format!("{:.2}", lo[1] + rng.random_range(0.0..width[1])));
            row.push(grades.choose(&mut rng).cloned().unwrap_or_default());
            rows.push(row);
        }
        let text_columns = headers[1..=texts.len()].to_vec();
        tables.push(SynthTable { path: format!("tables/{entity}.csv"), name: entity.clone(), headers, rows });
        bases.push(Base { entity, vocab, text_columns });
    }

    let mut truth: BTreeMap<Task, GroundTruth> = Task::ALL.iter().map(|t| (*t, GroundTruth::new(*t))).collect();

    // foreign keys: distinct (source, target) pairs
    let mut pairs: Vec<(usize, usize)> =
        (0..spec.n_tables).flat_map(|s| (0..spec.n_tables).filter(move |t| *t != s).map(move |t| (s, t))).collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(spec.planted_fks);
    pairs.sort();
    let mut fk_columns: Vec<(usize, String, usize)> = Vec::new();
    for &(s, t) in &pairs {
        let header = format!("{}_id", bases[t].entity);
        let target_rows = tables[t].rows.len();
        let n = tables[s].rows.len();
        for r in 0..n {
            let v = if spec.noise_rate > 0.0 && rng.random::<f64>() < spec.noise_rate {
                dangling_key(spec.n_tables + t, r)
            } else {
                key(t, rng.random_range(0..target_rows))
            };
            tables[s].rows[r].push(v);
        }
        tables[s].headers.push(header.clone());
        fk_columns.push((s, header, t));
    }
    for (s, header, t) in &fk_columns {
        let fk = tables[*s].column_id(header);
        let pk = tables[*t].column_id(&tables[*t].headers[0]);
        if let Some(g) = truth.get_mut(&Task::PkFk) { g.add(fk, pk) }
        add_both(&mut truth, Task::SyntacticJoin, fk, pk);
    }

    // unionable families
    let mut derived: Vec<Vec<usize>> = vec![Vec::new(); spec.n_tables];
    let mut origin: BTreeMap<(usize, String), (usize, String)> = BTreeMap::new();
    for f in 0..spec.unionable_families {
        let base = tables[f].clone();
        for k in 0..spec.family_size {
            let width = base.headers.len();
            let projection = k % 2 == 0;
            let keep_cols: Vec<usize> = if projection {
                let m = rng.random_range(width.div_ceil(2)..width.max(2)).min(width);
                let mut c = rand::seq::index::sample(&mut rng, width, m).into_vec();
                c.sort_unstable();
                c
            } else {
                (0..width).collect()
            };
            let keep_rows: Vec<usize> = if projection {
                (0..base.rows.len()).collect()
            } else {
                let m = (base.rows.len() as f64 * rng.random_range(0.5..0.9)).ceil() as usize;
                let mut r = rand::seq::index::sample(&mut rng, base.rows.len(), m.max(1)).into_vec();
                r.sort_unstable();
                r
            };
            let name = format!("{}_v{}", base.name, k + 1);
            let mut headers = Vec::new();
            for &c in &keep_cols {
                let h = if rng.random::<f64>() < spec.rename_noise { words.next(&mut rng) } else { base.headers[c].clone() };
                headers.push(h);
            }
            let rows = keep_rows.iter().map(|&r| keep_cols.iter().map(|&c| base.rows[r][c].clone()).collect()).collect();
            let idx = tables.len();
            for (h, &c) in headers.iter().zip(&keep_cols) {
                origin.insert((idx, h.clone()), (f, base.headers[c].clone()));
            }
            tables.push(SynthTable { path: format!("tables/{name}.csv"), name, headers, rows });
            derived[f].push(idx);
        }
    }
    for (f, members) in derived.iter().enumerate() {
        let family: Vec<usize> = std::iter::once(f).chain(members.iter().copied()).collect();
        if family.len() < 2 {
            continue;
        }
        for &a in &family {
            for &b in &family {
                if a != b {
                    let (ta, tb) = (tables[a].id(), tables[b].id());
                    if let Some(g) = truth.get_mut(&Task::Unionable) { g.add(ta, tb) }
                }
            }
        }
    }
    // derived columns join their origin and their siblings
    let mut by_origin: BTreeMap<(usize, String), Vec<DeId>> = BTreeMap::new();
    for ((idx, h), (f, oh)) in &origin {
        by_origin.entry((*f, oh.clone())).or_default().push(tables[*idx].column_id(h));
    }
    for ((f, oh), copies) in &by_origin {
        let mut all = copies.clone();
        all.push(tables[*f].column_id(oh));
        for &a in &all {
            for &b in &all {
                if a != b {
                    if let Some(g) = truth.get_mut(&Task::SyntacticJoin) { g.add(a, b) }
                }
            }
        }
        // copied foreign keys still reference their target
        if let Some((_, _, t)) = fk_columns.iter().find(|(s, h, _)| s == f && h == oh) {
            let pk = tables[*t].column_id(&tables[*t].headers[0]);
            for &c in copies {
                if let Some(g) = truth.get_mut(&Task::PkFk) { g.add(c, pk) }
                add_both(&mut truth, Task::SyntacticJoin, c, pk);
            }
        }
    }

    // documents
    let distractors: Vec<String> = (0..spec.distractor_vocab).map(|_| words.next(&mut rng)).collect();
    let mut order: Vec<usize> = (0..spec.n_tables).collect();
    order.shuffle(&mut rng);
    let mut docs = Vec::with_capacity(spec.n_docs);
    for j in 0..spec.n_docs {
        let t = order[j % order.len()];
        let used: Vec<&String> = {
            let mut s: BTreeSet<&String> = BTreeSet::new();
            for row in &tables[t].rows {
                for cell in &row[1..=spec.text_columns] {
                    for w in cell.split(' ') {
                        if let Some(v) = bases[t].vocab.iter().find(|v| *v == w) {
                            s.insert(v);
                        }
                    }
                }
            }
            s.into_iter().collect()
        };
        let n = range(&mut rng, spec.doc_words);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let w = if rng.random::<f64>() < spec.topic_share || distractors.is_empty() {
                used.choose(&mut rng).map(|s| s.as_str()).unwrap_or("")
            } else {
                distractors.choose(&mut rng).map(String::as_str).unwrap_or("")
            };
            out.push(w);
        }
        let mut body = String::new();
        for (i, w) in out.iter().enumerate() {
            body.push_str(w);
            body.push(if (i + 1) % 12 == 0 || i + 1 == out.len() { '.' } else { ' ' });
            if (i + 1) % 12 == 0 && i + 1 != out.len() {
                body.push(' ');
            }
        }
        let title = if rng.random::<f64>() < spec.title_signal {
            format!("{} report", bases[t].entity)
        } else {
            "field report".to_string()
        };
        let doc = SynthDoc {
            path: format!("docs/d{j:05}.txt"),
            title,
            source: "synthetic".into(),
            text: body,
        };
        let d = doc.id();
        let g = truth.get_mut(&Task::DocToTable).ok_or(Error::EmptyTruth)?;
        g.add(d, tables[t].id());
        for h in &bases[t].text_columns {
            if let Some(g) = truth.get_mut(&Task::DocToColumn) { g.add(d, tables[t].column_id(h)) }
        }
        for &idx in &derived[t] {
            let copies: Vec<DeId> = origin
                .iter()
                .filter(|((i, _), (f, oh))| *i == idx && *f == t && bases[t].text_columns.contains(oh))
                .map(|((i, h), _)| tables[*i].column_id(h))
                .collect();
            if !copies.is_empty() {
                if let Some(g) = truth.get_mut(&Task::DocToTable) { g.add(d, tables[idx].id()) }
                for c in copies {
                    if let Some(g) = truth.get_mut(&Task::DocToColumn) { g.add(d, c) }
                }
            }
        }
        docs.push(doc);
    }
    Ok(SyntheticLake { spec: spec.clone(), tables, docs, truth })
}

fn key(table: usize, row: usize) -> String {
    (table as u64 * 1_000_000 + 1 + row as u64).to_string()
}

/// Keys from a range no base table uses.
fn dangling_key(slot: usize, row: usize) -> String {
    key(slot + 1_000, row)
}

fn add_both(truth: &mut BTreeMap<Task, GroundTruth>, task: Task, a: DeId, b: DeId) {
    if let Some(g) = truth.get_mut(&task) {
        g.add(a, b);
        g.add(b, a);
    }
}

impl SyntheticLake {
    pub fn table(&self, name: &str) -> Option<&SynthTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Append duplicate rows to a table until `rate` of its original row
    /// count is duplicated; the key column loses its uniqueness.
    pub fn inject_duplicate_keys(&mut self, name: &str, rate: f64, seed: u64) -> Result<()> {
        let t = self.tables.iter_mut().find(|t| t.name == name).ok_or_else(|| Error::InvalidSpec(format!("no table {name}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = (t.rows.len() as f64 * rate).ceil() as usize;
        let picks = rand::seq::index::sample(&mut rng, t.rows.len(), m.min(t.rows.len())).into_vec();
        for r in picks {
            let row = t.rows[r].clone();
            t.rows.push(row);
        }
        Ok(())
    }

    pub fn corpus(&self, cfg: &CorpusConfig, par: Parallelism) -> Result<Corpus> {
        let mut b = CorpusBuilder::new(cfg.clone());
        for t in &self.tables {
            b.add_table(&t.path, &t.name, &t.to_csv()?)?;
        }
        for d in &self.docs {
            b.add_document(&d.path, &d.title, &d.source, &d.text)?;
        }
        Ok(b.finish(par))
    }

    /// Lake layout read by ingestion, plus `truth/<task>.jsonl` and the spec.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("tables"))?;
        std::fs::create_dir_all(dir.join("docs"))?;
        std::fs::create_dir_all(dir.join("truth"))?;
        let mut manifest = Manifest::default();
        for t in &self.tables {
            std::fs::write(dir.join(&t.path), t.to_csv()?)?;
        }
        for d in &self.docs {
            std::fs::write(dir.join(&d.path), &d.text)?;
            let entry = ManifestEntry { name: None, title: Some(d.title.clone()), source: Some(d.source.clone()) };
            manifest.files.insert(d.path.clone(), entry);
        }
        std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
        for (task, g) in &self.truth {
            if !g.is_empty() {
                g.save(&dir.join("truth").join(format!("{}.jsonl", task.as_str())))?;
            }
        }
        std::fs::write(dir.join("spec.json"), serde_json::to_vec_pretty(&self.spec)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiler::exact_containment;

    fn small() -> SyntheticLakeSpec {
        SyntheticLakeSpec { n_tables: 8, n_docs: 30, planted_fks: 4, unionable_families: 2, rows: [100, 150], ..Default::default() }
    }

    #[test]
    fn same_seed_same_lake() {
        let a = generate_synthetic_lake(&small()).unwrap();
        let b = generate_synthetic_lake(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_lake(&SyntheticLakeSpec { seed: 8, ..small() }).unwrap();
        assert_ne!(a.tables, c.tables);
    }

    #[test]
    fn truth_resolves_and_is_exact() {
        let lake = generate_synthetic_lake(&small()).unwrap();
        let corpus = lake.corpus(&CorpusConfig::default(), Parallelism::SEQUENTIAL).unwrap();
        for g in lake.truth.values() {
            g.validate(&corpus).unwrap();
        }
        let values = |id: &DeId| -> BTreeSet<String> {
            corpus.columns[id].non_empty_values().map(text::normalize_value).collect()
        };
        for (fk, pks) in &lake.truth[&Task::PkFk].entries {
            for pk in pks {
                assert_eq!(exact_containment(&values(fk), &values(pk)).unwrap(), 1.0);
            }
        }
        assert_eq!(lake.truth[&Task::Unionable].len(), 2 * 3);
    }

    #[test]
    fn invalid_specs() {
        for s in [
            SyntheticLakeSpec { n_tables: 0, ..small() },
            SyntheticLakeSpec { rows: [10, 5], ..small() },
            SyntheticLakeSpec { doc_words: [10, 900], ..small() },
            SyntheticLakeSpec { planted_fks: 100, ..small() },
        ] {
            assert!(matches!(generate_synthetic_lake(&s), Err(Error::InvalidSpec(_))));
        }
    }

    #[test]
    fn skewed_lake_has_low_mqcr() {
        let spec = SyntheticLakeSpec { doc_words: [5, 8], rows: [1500, 2000], n_tables: 4, n_docs: 20, planted_fks: 0, unionable_families: 0, ..small() };
        let lake = generate_synthetic_lake(&spec).unwrap();
        let corpus = lake.corpus(&CorpusConfig::default(), Parallelism::SEQUENTIAL).unwrap();
        let m = crate::eval::compute_mqcr(&lake.truth[&Task::DocToTable], &corpus).unwrap();
        assert!(m < 0.05, "mqcr {m}");
    }

    #[test]
    fn docs_stay_single_des() {
        let lake = generate_synthetic_lake(&small()).unwrap();
        let corpus = lake.corpus(&CorpusConfig::default(), Parallelism::SEQUENTIAL).unwrap();
        assert_eq!(corpus.docs.len(), lake.docs.len());
        assert!(corpus.docs.values().all(|d| d.parent_doc.is_none()));
    }
}
