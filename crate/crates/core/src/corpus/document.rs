//! Text documents into document DEs and bags of words.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ids::{DeId, DeKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentDe {
    pub id: DeId,
    pub title: String,
    pub source: String,
    pub raw_text: String,
    /// Set on the pieces of a document that was split.
    pub parent_doc: Option<DeId>,
    pub path: String,
    /// Byte offset of `raw_text` inside the source file.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOfWords {
    pub owner: DeId,
    pub tokens: BTreeMap<String, u32>,
    pub distinct_count: usize,
}

impl BagOfWords {
    pub fn from_terms(owner: DeId, terms: impl IntoIterator<Item = String>) -> Self {
        let mut tokens = BTreeMap::new();
        for t in terms {
            *tokens.entry(t).or_insert(0) += 1;
        }
        let distinct_count = tokens.len();
        BagOfWords { owner, tokens, distinct_count }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.values().map(|&c| c as usize).sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = &String> {
        self.tokens.keys()
    }

    /// Terms repeated by multiplicity, in sorted order.
    pub fn expanded(&self) -> Vec<String> {
        self.tokens.iter().flat_map(|(t, &c)| std::iter::repeat_n(t.clone(), c as usize)).collect()
    }
}

/// Document frequencies over the document DEs of a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfTable {
    pub n_docs: usize,
    pub df: BTreeMap<String, u32>,
}

impl DfTable {
    pub fn from_term_sets<'a>(sets: impl IntoIterator<Item = &'a BTreeSet<String>>) -> Self {
        let mut table = DfTable::default();
        for set in sets {
            table.n_docs += 1;
            for t in set {
                *table.df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        table
    }

    pub fn fraction(&self, term: &str) -> f64 {
        if self.n_docs == 0 {
            return 0.0;
        }
        self.df.get(term).copied().unwrap_or(0) as f64 / self.n_docs as f64
    }
}

/// Analyze a document and drop terms whose document frequency exceeds `df_cutoff`.
pub fn preprocess_document(doc: &DocumentDe, df: &DfTable, df_cutoff: f64) -> BagOfWords {
    preprocess_text(doc.id, &doc.raw_text, df, df_cutoff)
}

pub fn preprocess_text(owner: DeId, text: &str, df: &DfTable, df_cutoff: f64) -> BagOfWords {
    let terms = crate::text::analyze(text).into_iter().filter(|t| df.fraction(t) <= df_cutoff);
    BagOfWords::from_terms(owner, terms)
}

struct Word {
    start: usize,
    end: usize,
    paragraph_start: bool,
    sentence_end: bool,
}

fn scan_words(text: &str) -> Vec<Word> {
    let mut words = Vec::new();
    let mut gap_newlines = 0usize;
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                words.push(word(text, s, i, gap_newlines >= 2 || words.is_empty()));
                gap_newlines = 0;
            }
            if c == '\n' {
                gap_newlines += 1;
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        words.push(word(text, s, text.len(), gap_newlines >= 2 || words.is_empty()));
    }
    words
}

fn word(text: &str, start: usize, end: usize, paragraph_start: bool) -> Word {
    let w = text[start..end].trim_end_matches(['"', '\'', ')', ']']);
    let sentence_end = w.ends_with(['.', '!', '?']);
    Word { start, end, paragraph_start, sentence_end }
}

fn split_runs(range: Range<usize>, max: usize, boundary: impl Fn(usize) -> bool) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut s = range.start;
    for i in range.clone() {
        if boundary(i) || i + 1 == range.end {
            runs.push(s..i + 1);
            s = i + 1;
        }
    }
    // runs longer than max are cut into max-word pieces
    runs.into_iter()
        .flat_map(|r| {
            (r.start..r.end).step_by(max.max(1)).map(move |a| a..(a + max).min(r.end)).collect::<Vec<_>>()
        })
        .collect()
}

/// Split points for a document: paragraphs packed greedily up to
/// `max_words`; oversized paragraphs fall back to sentence boundaries.
fn chunk_words(words: &[Word], max_words: usize) -> Vec<Range<usize>> {
    let mut paragraphs = Vec::new();
    let mut s = 0;
    for i in 1..=words.len() {
        if i == words.len() || words[i].paragraph_start {
            paragraphs.push(s..i);
            s = i;
        }
    }
    let mut units = Vec::new();
    for p in paragraphs {
        if p.len() <= max_words {
            units.push(p);
        } else {
            units.extend(split_runs(p, max_words, |i| words[i].sentence_end));
        }
    }
    let mut chunks: Vec<Range<usize>> = Vec::new();
    for u in units {
        match chunks.last_mut() {
            Some(c) if c.len() + u.len() <= max_words => c.end = u.end,
            _ => chunks.push(u),
        }
    }
    chunks
}

/// One DE when the text fits in `max_de_words`; otherwise one child DE per
/// chunk, each a verbatim slice of the source sharing `parent_doc`.
pub fn ingest_document(
    text_source: &str,
    title: &str,
    source: &str,
    path: &str,
    max_de_words: usize,
) -> Result<Vec<DocumentDe>> {
    let words = scan_words(text_source);
    if words.is_empty() {
        return Err(Error::EmptyDocument(path.to_string()));
    }
    let make = |range: Range<usize>, parent: Option<DeId>| {
        let start = words[range.start].start;
        let end = words[range.end - 1].end;
        DocumentDe {
            id: DeId::derive(DeKind::Document, path, &start.to_string()),
            title: title.to_string(),
            source: source.to_string(),
            raw_text: text_source[start..end].to_string(),
            parent_doc: parent,
            path: path.to_string(),
            offset: start,
        }
    };
    if words.len() <= max_de_words {
        return Ok(vec![make(0..words.len(), None)]);
    }
    let parent = DeId::derive(DeKind::Document, path, "");
    Ok(chunk_words(&words, max_de_words).into_iter().map(|r| make(r, Some(parent))).collect())
}
