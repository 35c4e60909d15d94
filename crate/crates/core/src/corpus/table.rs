//! CSV tables into table and column DEs, with type inference and task tags.

use std::collections::{BTreeSet, HashSet};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::config::CorpusConfig;
use crate::ids::{DeId, DeKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Text,
    Numeric,
    Date,
    Categorical,
}

/// Which discovery tasks a column may take part in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskTag {
    CrossModal,
    KeywordSearch,
    PkFkCandidate,
    NumericOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDe {
    pub id: DeId,
    pub name: String,
    /// Lake-relative path of the source file.
    pub path: String,
    pub column_ids: Vec<DeId>,
    pub row_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDe {
    pub id: DeId,
    pub parent_table: DeId,
    pub name: String,
    pub values: Vec<String>,
    pub inferred_type: ColumnType,
    pub tags: BTreeSet<TaskTag>,
}

impl ColumnDe {
    pub fn non_empty_values(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(|v| v.trim()).filter(|v| !v.is_empty())
    }

    pub fn distinct_ratio(&self) -> f64 {
        distinct_ratio(&self.values)
    }

    pub fn mean_cell_len(&self) -> f64 {
        mean_cell_len(&self.values)
    }

    pub fn has_tag(&self, tag: TaskTag) -> bool {
        self.tags.contains(&tag)
    }
}

pub fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%Y/%m/%d", "%d/%m/%Y", "%m/%d/%Y", "%d-%m-%Y", "%d.%m.%Y"];
const DATETIME_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"];

pub fn parse_date(cell: &str) -> bool {
    let cell = cell.trim();
    DATE_FORMATS.iter().any(|f| NaiveDate::parse_from_str(cell, f).is_ok())
        || DATETIME_FORMATS.iter().any(|f| NaiveDateTime::parse_from_str(cell, f).is_ok())
        || cell.len() > 10 && chrono::DateTime::parse_from_rfc3339(cell).is_ok()
}

fn distinct_ratio(values: &[String]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let distinct: HashSet<String> = values
        .iter()
        .map(|v| crate::text::normalize_value(v))
        .filter(|v| !v.is_empty())
        .collect();
    distinct.len() as f64 / values.len() as f64
}

fn mean_cell_len(values: &[String]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|v| v.trim().chars().count()).sum::<usize>() as f64 / values.len() as f64
}

/// Numeric, then Date, by share of parseable non-empty cells; otherwise
/// Categorical when few distinct values relative to the row count, else Text.
pub fn infer_type(values: &[String], cfg: &CorpusConfig) -> ColumnType {
    let non_empty: Vec<&str> = values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()).collect();
    if !non_empty.is_empty() {
        let share = |ok: usize| ok as f64 / non_empty.len() as f64;
        let numeric = non_empty.iter().filter(|v| parse_number(v).is_some()).count();
        if share(numeric) >= cfg.type_threshold {
            return ColumnType::Numeric;
        }
        let dates = non_empty.iter().filter(|v| parse_date(v)).count();
        if share(dates) >= cfg.type_threshold {
            return ColumnType::Date;
        }
    }
    if distinct_ratio(values) < cfg.categorical_ratio {
        ColumnType::Categorical
    } else {
        ColumnType::Text
    }
}

/// Pure function of (type, distinct ratio, mean cell length).
pub fn tag_column(
    inferred_type: ColumnType,
    distinct_ratio: f64,
    mean_cell_len: f64,
    cfg: &CorpusConfig,
) -> BTreeSet<TaskTag> {
    let mut tags = BTreeSet::new();
    if inferred_type == ColumnType::Text && distinct_ratio >= cfg.categorical_ratio {
        tags.insert(TaskTag::CrossModal);
        tags.insert(TaskTag::KeywordSearch);
    }
    if inferred_type != ColumnType::Date && mean_cell_len <= cfg.long_text_chars as f64 {
        tags.insert(TaskTag::PkFkCandidate);
    }
    if inferred_type == ColumnType::Numeric {
        tags.insert(TaskTag::NumericOverlap);
    }
    tags
}

pub fn ingest_table(
    csv_source: &str,
    table_name: &str,
    path: &str,
    cfg: &CorpusConfig,
) -> Result<(TableDe, Vec<ColumnDe>)> {
    let malformed = |detail: String| Error::MalformedCsv { table: table_name.to_string(), detail };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(csv_source.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(malformed("missing header row".into()));
    }
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        for (slot, cell) in columns.iter_mut().zip(record.iter()) {
            slot.push(cell.to_string());
        }
    }
    let row_count = columns[0].len();
    if row_count == 0 {
        return Err(Error::EmptyTable(table_name.to_string()));
    }

    let table_id = DeId::derive(DeKind::Table, path, table_name);
    let mut seen = HashSet::new();
    let mut column_des = Vec::with_capacity(headers.len());
    for (pos, (name, values)) in headers.into_iter().zip(columns).enumerate() {
        let key = if seen.insert(name.clone()) { name.clone() } else { format!("{name}#{pos}") };
        let inferred_type = infer_type(&values, cfg);
        let tags = tag_column(inferred_type, distinct_ratio(&values), mean_cell_len(&values), cfg);
        column_des.push(ColumnDe {
            id: DeId::derive(DeKind::Column, path, &key),
            parent_table: table_id,
            name,
            values,
            inferred_type,
            tags,
        });
    }
    let table = TableDe {
        id: table_id,
        name: table_name.to_string(),
        path: path.to_string(),
        column_ids: column_des.iter().map(|c| c.id).collect(),
        row_count,
    };
    Ok((table, column_des))
}
