//! Lake ingestion: tables and documents become discoverable elements, documents
//! become bags of words, columns get task tags.

pub mod document;
pub mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use document::{ingest_document, preprocess_document, preprocess_text, BagOfWords, DfTable, DocumentDe};
pub use table::{infer_type, ingest_table, tag_column, ColumnDe, ColumnType, TableDe, TaskTag};

use crate::config::CorpusConfig;
use crate::ids::{DeId, DeKind};
use crate::par::{self, Parallelism};
use crate::{Error, Result};

/// The ingested lake: every DE plus document bags and the df table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub tables: BTreeMap<DeId, TableDe>,
    pub columns: BTreeMap<DeId, ColumnDe>,
    pub docs: BTreeMap<DeId, DocumentDe>,
    pub bags: BTreeMap<DeId, BagOfWords>,
    pub df: DfTable,
}

impl Corpus {
    pub fn kind_of(&self, id: DeId) -> Option<DeKind> {
        if self.columns.contains_key(&id) {
            Some(DeKind::Column)
        } else if self.tables.contains_key(&id) {
            Some(DeKind::Table)
        } else if self.docs.contains_key(&id) {
            Some(DeKind::Document)
        } else {
            None
        }
    }

    pub fn display_name(&self, id: DeId) -> Option<String> {
        if let Some(c) = self.columns.get(&id) {
            let table = self.tables.get(&c.parent_table).map(|t| t.name.as_str()).unwrap_or("?");
            return Some(format!("{table}.{}", c.name));
        }
        if let Some(t) = self.tables.get(&id) {
            return Some(t.name.clone());
        }
        self.docs.get(&id).map(|d| d.title.clone())
    }

    pub fn columns_with(&self, tag: TaskTag) -> impl Iterator<Item = &ColumnDe> {
        self.columns.values().filter(move |c| c.has_tag(tag))
    }

    /// Re-run document preprocessing for ad-hoc text with the corpus df table.
    pub fn preprocess_query_text(&self, text: &str) -> BagOfWords {
        preprocess_text(DeId::derive(DeKind::Document, "<query>", ""), text, &self.df, self.config.df_cutoff)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::artifact(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn ingest_lake(root: &Path, config: &CorpusConfig, par: Parallelism) -> Result<Self> {
        let manifest = Manifest::load(root)?;
        let mut builder = CorpusBuilder::new(config.clone());

        let table_files = list_files(&root.join("tables"), "csv")?;
        let parsed = par::map(&table_files, par, |rel| -> Result<(TableDe, Vec<ColumnDe>)> {
            let rel = format!("tables/{rel}");
            let text = std::fs::read_to_string(root.join(&rel))?;
            let name = manifest.table_name(&rel);
            ingest_table(&text, &name, &rel, config)
        });
        for table in parsed {
            let (t, cols) = table?;
            builder.push_table(t, cols);
        }

        let doc_files = list_files(&root.join("docs"), "txt")?;
        let parsed = par::map(&doc_files, par, |rel| -> Result<Vec<DocumentDe>> {
            let rel = format!("docs/{rel}");
            let text = std::fs::read_to_string(root.join(&rel))?;
            let (title, source) = manifest.doc_meta(&rel);
            ingest_document(&text, &title, &source, &rel, config.max_de_words)
        });
        for docs in parsed {
            builder.push_documents(docs?);
        }
        Ok(builder.finish(par))
    }
}

fn list_files(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                out.push(name.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: Option<String>,
    pub title: Option<String>,
    pub source: Option<String>,
}

/// Optional `manifest.json`: lake-relative file path -> display metadata.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub files: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join("manifest.json");
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| Error::artifact(path, e))
    }

    fn stem(rel: &str) -> String {
        Path::new(rel).file_stem().and_then(|s| s.to_str()).unwrap_or(rel).to_string()
    }

    pub fn table_name(&self, rel: &str) -> String {
        self.files.get(rel).and_then(|e| e.name.clone()).unwrap_or_else(|| Self::stem(rel))
    }

    pub fn doc_meta(&self, rel: &str) -> (String, String) {
        let entry = self.files.get(rel);
        let title = entry.and_then(|e| e.title.clone()).unwrap_or_else(|| Self::stem(rel));
        let source = entry.and_then(|e| e.source.clone()).unwrap_or_else(|| rel.to_string());
        (title, source)
    }
}

/// Single-writer assembly of a corpus; the df table and bags are computed in
/// [`CorpusBuilder::finish`] once every document is known.
pub struct CorpusBuilder {
    config: CorpusConfig,
    tables: BTreeMap<DeId, TableDe>,
    columns: BTreeMap<DeId, ColumnDe>,
    docs: BTreeMap<DeId, DocumentDe>,
}

impl CorpusBuilder {
    pub fn new(config: CorpusConfig) -> Self {
        CorpusBuilder { config, tables: BTreeMap::new(), columns: BTreeMap::new(), docs: BTreeMap::new() }
    }

    pub fn add_table(&mut self, path: &str, name: &str, csv_source: &str) -> Result<DeId> {
        let (table, cols) = ingest_table(csv_source, name, path, &self.config)?;
        let id = table.id;
        self.push_table(table, cols);
        Ok(id)
    }

    pub fn add_document(&mut self, path: &str, title: &str, source: &str, text: &str) -> Result<Vec<DeId>> {
        let docs = ingest_document(text, title, source, path, self.config.max_de_words)?;
        let ids = docs.iter().map(|d| d.id).collect();
        self.push_documents(docs);
        Ok(ids)
    }

    pub fn push_table(&mut self, table: TableDe, cols: Vec<ColumnDe>) {
        for c in cols {
            self.columns.insert(c.id, c);
        }
        self.tables.insert(table.id, table);
    }

    pub fn push_documents(&mut self, docs: Vec<DocumentDe>) {
        for d in docs {
            self.docs.insert(d.id, d);
        }
    }

    pub fn finish(self, par: Parallelism) -> Corpus {
        let docs: Vec<&DocumentDe> = self.docs.values().collect();
        let term_sets: Vec<BTreeSet<String>> =
            par::map(&docs, par, |d| crate::text::analyze(&d.raw_text).into_iter().collect());
        let df = DfTable::from_term_sets(&term_sets);
        let cutoff = self.config.df_cutoff;
        let bags = par::map(&docs, par, |d| preprocess_document(d, &df, cutoff));
        let bags = bags.into_iter().map(|b| (b.owner, b)).collect();
        Corpus { config: self.config, tables: self.tables, columns: self.columns, docs: self.docs, bags, df }
    }
}
