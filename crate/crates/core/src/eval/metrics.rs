//! Ranking metrics, query/candidate size ratios and relative recall.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::DeId;
use crate::{Error, Result};

fn hits_in_top(result: &[DeId], truth: &BTreeSet<DeId>, k: usize) -> usize {
    result.iter().take(k).filter(|id| truth.contains(id)).count()
}

/// Precision over the returned top-k (at most k items) and recall against
/// the full truth set. An empty result scores (0, 0).
pub fn precision_recall_at_k(result: &[DeId], truth: &BTreeSet<DeId>, k: usize) -> Result<(f64, f64)> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    if k == 0 {
        return Err(Error::InvalidQuery("k must be at least 1".into()));
    }
    if result.is_empty() {
        return Ok((0.0, 0.0));
    }
    let hits = hits_in_top(result, truth, k) as f64;
    Ok((hits / k.min(result.len()) as f64, hits / truth.len() as f64))
}

/// Precision at k = |truth|, which is also the recall at that k.
pub fn r_precision(result: &[DeId], truth: &BTreeSet<DeId>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    Ok(hits_in_top(result, truth, truth.len()) as f64 / truth.len() as f64)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Median of query size over candidate size across links.
pub fn mqcr(links: &[(f64, f64)]) -> Result<f64> {
    let mut ratios: Vec<f64> = links.iter().filter(|(_, c)| *c > 0.0).map(|(q, c)| q / c).collect();
    median(&mut ratios).ok_or(Error::EmptyTruth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecall {
    pub relative_recall: f64,
    /// Share of queries for which the measure found at least one true match.
    pub queries_answered: f64,
}

/// For each measure, its true hits (query, answer) divided by the true hits
/// of all measures together.
pub fn relative_recall(
    per_measure: &BTreeMap<String, BTreeSet<(DeId, DeId)>>,
    n_queries: usize,
) -> BTreeMap<String, MeasureRecall> {
    let union: BTreeSet<&(DeId, DeId)> = per_measure.values().flatten().collect();
    per_measure
        .iter()
        .map(|(name, hits)| {
            let rr = if union.is_empty() { 0.0 } else { hits.len() as f64 / union.len() as f64 };
            let answered: BTreeSet<DeId> = hits.iter().map(|(q, _)| *q).collect();
            let qa = if n_queries == 0 { 0.0 } else { answered.len() as f64 / n_queries as f64 };
            (name.clone(), MeasureRecall { relative_recall: rr, queries_answered: qa })
        })
        .collect()
}
