//! Generative label model over {1, abstain} votes, and gold-label LF pruning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lf::LabelMatrix;
use super::sample::GoldLabels;
use crate::ids::DeId;
use crate::{Error, Result};

const EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMethod {
    Em,
    MajorityVote,
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModel {
    /// Per LF in matrix order; None for inactive LFs.
    pub lf_accuracy: Vec<Option<f64>>,
    pub class_prior: f64,
    pub method: LabelMethod,
    pub iterations: usize,
}

/// P(y=1 | votes) for every matrix entry voted by an active LF.
pub type ProbLabels = BTreeMap<(DeId, DeId), f64>;

fn product_sorted(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.into_iter().product()
}

fn posterior(prior: f64, alphas: &[f64], voters: u32) -> f64 {
    let voted: Vec<f64> = alphas.iter().enumerate().filter(|(i, _)| voters & (1 << i) != 0).map(|(_, a)| *a).collect();
    let pos = prior * product_sorted(voted.clone());
    let neg = (1.0 - prior) * product_sorted(voted.into_iter().map(|a| 1.0 - a).collect());
    pos / (pos + neg)
}

fn active_mask(active: &[bool]) -> u32 {
    active.iter().enumerate().filter(|(_, a)| **a).fold(0, |m, (i, _)| m | (1 << i))
}

/// EM over a conditionally independent model: LF i votes 1 correctly with
/// probability α_i; abstentions carry no information.
pub fn em_fit(matrix: &LabelMatrix, active: &[bool], max_iter: usize, tol: f64) -> Result<(LabelModel, ProbLabels)> {
    let mask = active_mask(active);
    let entries: Vec<((DeId, DeId), u32)> =
        matrix.votes.iter().map(|(k, v)| (*k, v & mask)).filter(|(_, v)| *v != 0).collect();
    if entries.is_empty() {
        return Err(Error::EmptyLabelMatrix);
    }
    let n_lfs = matrix.num_lfs();
    let mut alpha = vec![0.7; n_lfs];
    let mut prior = 0.5;
    let mut mu = vec![0.0; entries.len()];
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        for (m, (_, v)) in mu.iter_mut().zip(&entries) {
            *m = posterior(prior, &alpha, *v);
        }
        let mut next = vec![0.0; n_lfs];
        let mut counts = vec![0usize; n_lfs];
        for (m, (_, v)) in mu.iter().zip(&entries) {
            for i in 0..n_lfs {
                if v & (1 << i) != 0 {
                    next[i] += m;
                    counts[i] += 1;
                }
            }
        }
        let mut delta: f64 = 0.0;
        for i in 0..n_lfs {
            if counts[i] > 0 {
                let a = (next[i] / counts[i] as f64).clamp(EPS, 1.0 - EPS);
                delta = delta.max((a - alpha[i]).abs());
                alpha[i] = a;
            }
        }
        let p = (mu.iter().sum::<f64>() / mu.len() as f64).clamp(EPS, 1.0 - EPS);
        delta = delta.max((p - prior).abs());
        prior = p;
        if delta < tol {
            break;
        }
    }
    let labels = entries.iter().map(|(k, v)| (*k, posterior(prior, &alpha, *v))).collect();
    let lf_accuracy = (0..n_lfs).map(|i| active.get(i).copied().unwrap_or(false).then_some(alpha[i])).collect();
    Ok((LabelModel { lf_accuracy, class_prior: prior, method: LabelMethod::Em, iterations }, labels))
}

/// Label-model entry point with the degenerate-input fallbacks.
pub fn fit_label_model(matrix: &LabelMatrix, active: &[bool], max_iter: usize, tol: f64) -> Result<(LabelModel, ProbLabels)> {
    let mask = active_mask(active);
    let n_active = mask.count_ones();
    let voted: Vec<((DeId, DeId), u32)> =
        matrix.votes.iter().map(|(k, v)| (*k, v & mask)).filter(|(_, v)| *v != 0).collect();
    if voted.is_empty() || n_active == 0 {
        return Err(Error::EmptyLabelMatrix);
    }
    let flat = |method| LabelModel {
        lf_accuracy: vec![None; matrix.num_lfs()],
        class_prior: voted.len() as f64 / matrix.docs.len().max(1) as f64 / matrix.cols.len().max(1) as f64,
        method,
        iterations: 0,
    };
    if n_active == 1 {
        let labels = voted.iter().map(|(k, _)| (*k, 1.0)).collect();
        return Ok((flat(LabelMethod::PassThrough), labels));
    }
    let universe = matrix.docs.len() * matrix.cols.len();
    let identical = voted.len() == universe && voted.iter().all(|(_, v)| *v == voted[0].1);
    if identical {
        log::warn!("label matrix is degenerate (every pair carries the same votes); using majority vote");
        let labels = voted.iter().map(|(k, v)| (*k, f64::from(v.count_ones()) / f64::from(n_active))).collect();
        return Ok((flat(LabelMethod::MajorityVote), labels));
    }
    em_fit(matrix, active, max_iter, tol)
}

/// Per-LF accuracy on gold-covered pairs of the sampled universe, where an
/// abstention counts as a 0 vote.
pub fn gold_accuracies(matrix: &LabelMatrix, gold: &GoldLabels) -> (Vec<f64>, usize) {
    let docs: std::collections::BTreeSet<&DeId> = matrix.docs.iter().collect();
    let cols: std::collections::BTreeSet<&DeId> = matrix.cols.iter().collect();
    let covered: Vec<(&(DeId, DeId), &bool)> =
        gold.entries.iter().filter(|((d, c), _)| docs.contains(d) && cols.contains(c)).collect();
    let acc = (0..matrix.num_lfs())
        .map(|i| {
            let right = covered.iter().filter(|(k, g)| (matrix.vote_vector(k.0, k.1) & (1 << i) != 0) == **g).count();
            if covered.is_empty() {
                0.0
            } else {
                right as f64 / covered.len() as f64
            }
        })
        .collect();
    (acc, covered.len())
}

/// Switches off LF i iff acc_i < rel_threshold · max_j acc_j.
pub fn prune_by_accuracy(accuracies: &[f64], rel_threshold: f64) -> Vec<bool> {
    let best = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    accuracies.iter().map(|a| *a >= rel_threshold * best).collect()
}

pub fn prune_lfs_with_gold(
    matrix: &LabelMatrix,
    gold: &GoldLabels,
    rel_threshold: f64,
    min_gold_pairs: usize,
) -> Result<(Vec<bool>, Vec<f64>)> {
    let (acc, covered) = gold_accuracies(matrix, gold);
    if covered < min_gold_pairs {
        return Err(Error::InsufficientGold { have: covered, need: min_gold_pairs });
    }
    Ok((prune_by_accuracy(&acc, rel_threshold), acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::DeKind;

    fn ids(kind: DeKind, n: usize) -> Vec<DeId> {
        (0..n).map(|i| DeId::derive(kind, "m", &i.to_string())).collect()
    }

    fn matrix(n_lfs: usize, docs: usize, cols: usize, votes: impl Fn(usize, usize) -> u32) -> LabelMatrix {
        let d = ids(DeKind::Document, docs);
        let c = ids(DeKind::Column, cols);
        let mut v = BTreeMap::new();
        for (i, di) in d.iter().enumerate() {
            for (j, cj) in c.iter().enumerate() {
                let x = votes(i, j);
                if x != 0 {
                    v.insert((*di, *cj), x);
                }
            }
        }
        LabelMatrix { lf_names: (0..n_lfs).map(|i| format!("lf{i}")).collect(), k_probe: cols, docs: d, cols: c, votes: v }
    }

    #[test]
    fn prune_rule_examples() {
        assert_eq!(prune_by_accuracy(&[0.9, 0.8, 0.85, 0.3], 0.5), vec![true, true, true, false]);
        assert_eq!(prune_by_accuracy(&[0.6, 0.6, 0.6], 0.5), vec![true; 3]);
    }

    #[test]
    fn insufficient_gold() {
        let m = matrix(2, 2, 2, |i, j| u32::from(i == j) * 3);
        let mut gold = GoldLabels::default();
        gold.entries.insert((m.docs[0], m.cols[0]), true);
        assert!(matches!(prune_lfs_with_gold(&m, &gold, 0.5, 20), Err(Error::InsufficientGold { have: 1, need: 20 })));
    }

    #[test]
    fn agreeing_pair_reaches_upper_fixed_point() {
        // Both LFs vote on the same half of the universe. The symmetric model's
        // fixed points are mu in {0, 1/2, 1}; from alpha = 0.7 EM climbs to 1.
        let m = matrix(2, 4, 4, |i, j| if (i + j) % 2 == 0 { 0b11 } else { 0 });
        let (model, labels) = fit_label_model(&m, &[true, true], 200, 1e-12).unwrap();
        assert_eq!(model.method, LabelMethod::Em);
        assert!(labels.values().all(|p| *p > 0.5));
        for a in model.lf_accuracy.iter().flatten() {
            assert!(*a > 0.5);
            assert!((a - (1.0 - EPS)).abs() < 1e-6);
        }
    }

    #[test]
    fn single_active_lf_passes_votes_through() {
        let m = matrix(2, 3, 3, |i, j| if i == j { 1 } else { 2 });
        let (model, labels) = fit_label_model(&m, &[true, false], 100, 1e-9).unwrap();
        assert_eq!(model.method, LabelMethod::PassThrough);
        assert_eq!(labels.len(), 3);
        assert!(labels.values().all(|p| *p == 1.0));
    }

    #[test]
    fn identical_votes_fall_back_to_majority() {
        let m = matrix(3, 2, 2, |_, _| 0b011);
        let (model, labels) = fit_label_model(&m, &[true, true, true], 100, 1e-9).unwrap();
        assert_eq!(model.method, LabelMethod::MajorityVote);
        assert!(labels.values().all(|p| (*p - 2.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let m = matrix(2, 2, 2, |_, _| 0);
        assert!(matches!(fit_label_model(&m, &[true, true], 10, 1e-9), Err(Error::EmptyLabelMatrix)));
    }
}
