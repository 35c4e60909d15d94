//! Ground-truth files: one JSON line `{query_id, answers}` per query, or CSV
//! `query_id,answer_id` pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::ids::DeId;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    DocToTable,
    /// Document to the columns its text was drawn from; feeds gold labels.
    DocToColumn,
    SyntacticJoin,
    PkFk,
    Unionable,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::DocToTable, Task::DocToColumn, Task::SyntacticJoin, Task::PkFk, Task::Unionable];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::DocToTable => "doc_to_table",
            Task::DocToColumn => "doc_to_column",
            Task::SyntacticJoin => "syntactic_join",
            Task::PkFk => "pk_fk",
            Task::Unionable => "unionable",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Task::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| Error::InvalidQuery(format!("unknown task {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Line {
    query_id: DeId,
    answers: Vec<DeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub task: Task,
    pub entries: BTreeMap<DeId, BTreeSet<DeId>>,
}

impl GroundTruth {
    pub fn new(task: Task) -> Self {
        GroundTruth { task, entries: BTreeMap::new() }
    }

    pub fn add(&mut self, query: DeId, answer: DeId) {
        self.entries.entry(query).or_default().insert(answer);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pairs(&self) -> BTreeSet<(DeId, DeId)> {
        self.entries.iter().flat_map(|(q, a)| a.iter().map(move |x| (*q, *x))).collect()
    }

    /// Nonempty, with every id present in the corpus.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        if self.entries.is_empty() || self.entries.values().any(BTreeSet::is_empty) {
            return Err(Error::EmptyTruth);
        }
        for (q, answers) in &self.entries {
            for id in std::iter::once(q).chain(answers) {
                if corpus.kind_of(*id).is_none() {
                    return Err(Error::UnknownDe(*id));
                }
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for (q, a) in &self.entries {
            serde_json::to_writer(&mut out, &Line { query_id: *q, answers: a.iter().copied().collect() })?;
            out.write_all(b"\n")?;
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    /// JSON lines, or CSV pairs when the file ends in `.csv`.
    pub fn load(path: &Path, task: Task) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::artifact(path, e))?;
        let csv = path.extension().is_some_and(|e| e == "csv");
        let mut truth = GroundTruth::new(task);
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |d: String| Error::artifact(path, format!("line {}: {d}", n + 1));
            if csv {
                let mut parts = line.split(',').map(str::trim);
                let (Some(q), Some(a)) = (parts.next(), parts.next()) else { return Err(bad("expected two fields".into())) };
                match (q.parse::<DeId>(), a.parse::<DeId>()) {
                    (Ok(q), Ok(a)) => truth.add(q, a),
                    // header row
                    _ if n == 0 => {}
                    (Err(e), _) | (_, Err(e)) => return Err(bad(e.to_string())),
                }
            } else {
                let l: Line = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
                for a in l.answers {
                    truth.add(l.query_id, a);
                }
            }
        }
        Ok(truth)
    }
}
