//! Building the lake's index set and persisting each index to its own file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ContainmentIndex, ContainmentParams, LshParams, Signal, TextEntry, TextField, TextIndex, VectorIndex};
use crate::config::IndexConfig;
use crate::corpus::{Corpus, TaskTag};
use crate::ids::{DeId, DeKind};
use crate::profiler::store::{decode_body, read_framed, write_framed};
use crate::profiler::ProfileStore;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"LLINDX01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub kind: String,
    pub count: usize,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    /// Documents plus keyword-searchable columns.
    pub content: TextIndex,
    /// Titles/sources of documents, table and column names of columns.
    pub metadata: TextIndex,
    /// Column value sets.
    pub values: ContainmentIndex,
    /// Solo content vectors of columns.
    pub solo: VectorIndex,
    pub joint: Option<VectorIndex>,
}

pub const FILES: [&str; 5] = ["content.idx", "metadata.idx", "containment.idx", "solo.idx", "joint.idx"];

impl IndexSet {
    pub fn build(corpus: &Corpus, store: &ProfileStore, cfg: &IndexConfig) -> Result<Self> {
        let mut content = Vec::new();
        let mut metadata = Vec::new();
        let mut values = Vec::new();
        let mut solo = Vec::new();
        for (id, b) in &store.bundles {
            let meta = b.metadata_tokens.iter().map(|t| (t.as_str(), 1)).collect();
            metadata.push(TextEntry { id: *id, kind: b.kind, tokens: meta });
            match b.kind {
                DeKind::Document => {
                    let bag = corpus.bags.get(id);
                    let tokens = bag.map(|g| g.tokens.iter().map(|(t, c)| (t.as_str(), *c)).collect()).unwrap_or_default();
                    content.push(TextEntry { id: *id, kind: b.kind, tokens });
                }
                DeKind::Column => {
                    let keyword = corpus.columns.get(id).is_some_and(|c| c.has_tag(TaskTag::KeywordSearch));
                    if keyword {
                        let tokens = b.token_set.iter().map(|t| (t.as_str(), 1)).collect();
                        content.push(TextEntry { id: *id, kind: b.kind, tokens });
                    }
                    if let Some(sig) = &b.value_minhash {
                        values.push((*id, sig.clone()));
                    }
                    if let Some(s) = &b.solo {
                        solo.push((*id, s.content.vec.clone()));
                    }
                }
                DeKind::Table => {}
            }
        }
        Ok(IndexSet {
            content: TextIndex::build(content, TextField::Content, cfg.bm25_k1, cfg.bm25_b),
            metadata: TextIndex::build(metadata, TextField::Metadata, cfg.bm25_k1, cfg.bm25_b),
            values: ContainmentIndex::build(values, ContainmentParams::from(cfg))?,
            solo: VectorIndex::build(
                solo,
                store.header.embedding_dim,
                Signal::SoloSemantic,
                cfg.vector_backend,
                &LshParams::from(cfg),
            )?,
            joint: None,
        })
    }

    pub fn kind_filter<'a>(store: &'a ProfileStore, kind: DeKind) -> impl Fn(DeId) -> bool + 'a {
        move |id| store.bundles.get(&id).is_some_and(|b| b.kind == kind)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        save_index(&dir.join(FILES[0]), "bm25_content", self.content.len(), params_text(&self.content), &self.content)?;
        save_index(&dir.join(FILES[1]), "bm25_metadata", self.metadata.len(), params_text(&self.metadata), &self.metadata)?;
        let p = serde_json::json!({"num_hashes": self.values.num_hashes, "seed": self.values.seed, "params": self.values.params});
        save_index(&dir.join(FILES[2]), "containment", self.values.len(), p, &self.values)?;
        save_index(&dir.join(FILES[3]), "solo_vector", self.solo.len(), params_vec(&self.solo), &self.solo)?;
        // an absent joint index leaves any existing file alone
        if let Some(j) = &self.joint {
            save_index(&dir.join(FILES[4]), "joint_vector", j.len(), params_vec(j), j)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let joint = dir.join(FILES[4]);
        Ok(IndexSet {
            content: load_index(&dir.join(FILES[0]))?,
            metadata: load_index(&dir.join(FILES[1]))?,
            values: load_index(&dir.join(FILES[2]))?,
            solo: load_index(&dir.join(FILES[3]))?,
            joint: if joint.exists() { Some(load_index(&joint)?) } else { None },
        })
    }
}

fn params_text(t: &TextIndex) -> serde_json::Value {
    serde_json::json!({"field": t.field, "k1": t.k1, "b": t.b, "avg_doc_length": t.avg_doc_length})
}

fn params_vec(v: &VectorIndex) -> serde_json::Value {
    serde_json::json!({"dim": v.dim, "backend": v.backend, "signal": v.signal})
}

pub fn save_index<T: Serialize>(path: &Path, kind: &str, count: usize, params: serde_json::Value, index: &T) -> Result<()> {
    let header = IndexHeader { kind: kind.to_string(), count, params };
    std::fs::write(path, write_framed(MAGIC, &header, index)?)?;
    Ok(())
}

pub fn load_index<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::artifact(path, e))?;
    let (_header, body): (IndexHeader, _) = read_framed(MAGIC, &bytes, path)?;
    decode_body(body, path)
}

pub fn read_header(path: &Path) -> Result<IndexHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::artifact(path, e))?;
    Ok(read_framed(MAGIC, &bytes, path)?.0)
}
