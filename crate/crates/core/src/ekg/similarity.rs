//! Column-pair measures: names, numeric ranges and the ensemble score.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::EnsembleWeights;
use crate::profiler::NumericStats;

/// Lowercase identifier tokens: split on non-alphanumerics, camelCase and
/// letter/digit boundaries.
pub fn identifier_tokens(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev: Option<char> = None;
    for ch in name.chars() {
        if !ch.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            let boundary = (p.is_lowercase() && ch.is_uppercase())
                || (p.is_alphabetic() && ch.is_numeric())
                || (p.is_numeric() && ch.is_alphabetic());
            if boundary && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        cur.extend(ch.to_lowercase());
        prev = Some(ch);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Identifier tokens plus character 3-grams of the separator-free name,
/// hashed so that pairwise comparison is a sorted merge.
pub fn name_features(name: &str) -> Vec<u64> {
    use crate::profiler::minhash::fnv1a64;
    let mut set = BTreeSet::new();
    for t in identifier_tokens(name) {
        set.insert(fnv1a64(format!("t:{t}").as_bytes()));
    }
    let squashed: Vec<char> = name.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
    if squashed.len() < 3 {
        if !squashed.is_empty() {
            set.insert(fnv1a64(format!("g:{}", squashed.iter().collect::<String>()).as_bytes()));
        }
    } else {
        for w in squashed.windows(3) {
            set.insert(fnv1a64(format!("g:{}", w.iter().collect::<String>()).as_bytes()));
        }
    }
    set.into_iter().collect()
}

/// Jaccard of two sorted feature lists.
pub fn feature_jaccard(a: &[u64], b: &[u64]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn name_similarity(a: &str, b: &str) -> f64 {
    feature_jaccard(&name_features(a), &name_features(b))
}

/// Interval intersection over union of the two [min, max] ranges.
pub fn numeric_overlap(a: &NumericStats, b: &NumericStats) -> f64 {
    let a_point = a.min == a.max;
    let b_point = b.min == b.max;
    if a_point && b_point {
        return if a.min == b.min { 1.0 } else { 0.0 };
    }
    let inter = (a.max.min(b.max) - a.min.max(b.min)).max(0.0);
    let union = a.max.max(b.max) - a.min.min(b.min);
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnPairScores {
    pub name_sim: Option<f64>,
    pub containment_fwd: Option<f64>,
    pub containment_rev: Option<f64>,
    pub numeric_sim: Option<f64>,
    pub semantic_sim: Option<f64>,
}

impl ColumnPairScores {
    pub fn containment(&self) -> Option<f64> {
        match (self.containment_fwd, self.containment_rev) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    /// (measure, value, weight) for every present measure.
    pub fn measures(&self, w: &EnsembleWeights) -> Vec<(&'static str, f64, f64)> {
        let mut out = Vec::with_capacity(4);
        if let Some(x) = self.name_sim {
            out.push(("name", x, w.name));
        }
        if let Some(x) = self.containment() {
            out.push(("containment", x, w.containment));
        }
        if let Some(x) = self.numeric_sim {
            out.push(("numeric", x, w.numeric));
        }
        if let Some(x) = self.semantic_sim {
            out.push(("semantic", x, w.semantic));
        }
        out
    }

    /// Weighted mean over the present measures.
    pub fn combined(&self, w: &EnsembleWeights) -> f64 {
        let m = self.measures(w);
        let total: f64 = m.iter().map(|(_, _, wt)| wt).sum();
        if total <= 0.0 {
            return 0.0;
        }
        m.iter().map(|(_, x, wt)| x * wt).sum::<f64>() / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(min: f64, max: f64) -> NumericStats {
        NumericStats { min, max, distinct_count: 2, value_count: 2, domain_size: max - min }
    }

    #[test]
    fn name_cases() {
        assert_eq!(name_similarity("drug_id", "drug_id"), 1.0);
        assert_eq!(identifier_tokens("drugId"), identifier_tokens("drug_id"));
        assert!(name_similarity("drugId", "drug_id") >= 0.5);
        assert_eq!(name_similarity("abc", "xyz"), 0.0);
        assert_eq!(identifier_tokens("Batch2024Lot"), vec!["batch", "2024", "lot"]);
    }

    #[test]
    fn interval_cases() {
        assert_eq!(numeric_overlap(&stats(0.0, 10.0), &stats(0.0, 10.0)), 1.0);
        assert_eq!(numeric_overlap(&stats(0.0, 10.0), &stats(20.0, 30.0)), 0.0);
        assert!((numeric_overlap(&stats(0.0, 10.0), &stats(5.0, 15.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(numeric_overlap(&stats(3.0, 3.0), &stats(3.0, 3.0)), 1.0);
        assert_eq!(numeric_overlap(&stats(3.0, 3.0), &stats(4.0, 4.0)), 0.0);
    }

    #[test]
    fn ensemble_presence_rule() {
        let w = EnsembleWeights::default();
        let s = ColumnPairScores {
            name_sim: Some(0.8),
            containment_fwd: Some(0.6),
            containment_rev: Some(0.2),
            numeric_sim: None,
            semantic_sim: Some(0.4),
        };
        assert!((s.combined(&w) - 0.6).abs() < 1e-15);
        assert_eq!(s.measures(&w).len(), 3);
        let ones = ColumnPairScores {
            name_sim: Some(1.0),
            containment_fwd: Some(1.0),
            containment_rev: Some(1.0),
            numeric_sim: Some(1.0),
            semantic_sim: Some(1.0),
        };
        assert_eq!(ones.combined(&w), 1.0);
    }
}
