//! Discovery result sets and their combination.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ids::DeId;
use crate::indexes::rank_order;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrsItem {
    pub id: DeId,
    pub score: f64,
}

/// One step of the chain that produced a result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub id: String,
    pub op: String,
    pub params: serde_json::Value,
    pub parents: Vec<String>,
}

impl OpRecord {
    pub fn new(op: &str, params: serde_json::Value, parents: Vec<String>) -> Self {
        let mut h = Sha256::new();
        h.update(op.as_bytes());
        h.update([0]);
        h.update(params.to_string().as_bytes());
        for p in &parents {
            h.update([0]);
            h.update(p.as_bytes());
        }
        let id = hex::encode(&h.finalize()[..8]);
        OpRecord { id, op: op.to_string(), params, parents }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drs {
    pub id: String,
    pub items: Vec<DrsItem>,
    /// Every record the result depends on, parents before children; the
    /// last record produced this set.
    pub provenance: Vec<OpRecord>,
}

impl Drs {
    pub fn new(mut items: Vec<DrsItem>, record: OpRecord, mut ancestry: Vec<OpRecord>) -> Self {
        sort_items(&mut items);
        let id = record.id.clone();
        ancestry.push(record);
        Drs { id, items, provenance: ancestry }
    }

    pub fn ids(&self) -> Vec<DeId> {
        self.items.iter().map(|i| i.id).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn last_record(&self) -> Option<&OpRecord> {
        self.provenance.last()
    }
}

pub fn sort_items(items: &mut [DrsItem]) {
    items.sort_by(|a, b| rank_order((a.score, a.id), (b.score, b.id)));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineOp {
    Union,
    Intersect,
}

/// Scores rescaled to [0, 1]; a constant set maps to 1.
pub fn min_max(items: &[DrsItem]) -> BTreeMap<DeId, f64> {
    let lo = items.iter().map(|i| i.score).fold(f64::INFINITY, f64::min);
    let hi = items.iter().map(|i| i.score).fold(f64::NEG_INFINITY, f64::max);
    items
        .iter()
        .map(|i| {
            let s = if hi > lo { (i.score - lo) / (hi - lo) } else { 1.0 };
            (i.id, s)
        })
        .collect()
}

/// Normalized-sum union or intersection of two result sets.
pub fn drs_combine(a: &Drs, b: &Drs, op: CombineOp) -> Drs {
    let na = min_max(&a.items);
    let nb = min_max(&b.items);
    let mut merged: BTreeMap<DeId, f64> = BTreeMap::new();
    match op {
        CombineOp::Union => {
            for (id, s) in na.iter().chain(&nb) {
                *merged.entry(*id).or_insert(0.0) += s;
            }
        }
        CombineOp::Intersect => {
            for (id, s) in &na {
                if let Some(t) = nb.get(id) {
                    merged.insert(*id, s + t);
                }
            }
        }
    }
    let items = merged.into_iter().map(|(id, score)| DrsItem { id, score }).collect();
    let params = serde_json::json!({ "op": op });
    let record = OpRecord::new("drs_combine", params, vec![a.id.clone(), b.id.clone()]);
    let mut ancestry: Vec<OpRecord> = Vec::new();
    for r in a.provenance.iter().chain(&b.provenance) {
        if !ancestry.iter().any(|x| x.id == r.id) {
            ancestry.push(r.clone());
        }
    }
    Drs::new(items, record, ancestry)
}
