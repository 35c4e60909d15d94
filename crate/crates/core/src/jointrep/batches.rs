//! Mini-batch partitioning of the training set's documents and columns.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ids::DeId;
use crate::weaklabel::TrainingPair;

#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub docs: Vec<DeId>,
    pub cols: Vec<DeId>,
    /// Row-major docs × cols.
    pub relatedness: Vec<f64>,
}

impl MiniBatch {
    pub fn score(&self, row: usize, col: usize) -> f64 {
        self.relatedness[row * self.cols.len() + col]
    }
}

/// Lookup of training-pair relatedness with the distinct docs and columns.
pub struct TrainingMatrix {
    pub docs: Vec<DeId>,
    pub cols: Vec<DeId>,
    pub scores: BTreeMap<(DeId, DeId), f64>,
}

impl TrainingMatrix {
    pub fn new(pairs: &[TrainingPair]) -> Self {
        let docs: BTreeSet<DeId> = pairs.iter().map(|p| p.doc).collect();
        let cols: BTreeSet<DeId> = pairs.iter().map(|p| p.col).collect();
        let scores = pairs.iter().map(|p| ((p.doc, p.col), p.relatedness)).collect();
        TrainingMatrix { docs: docs.into_iter().collect(), cols: cols.into_iter().collect(), scores }
    }

    pub fn get(&self, doc: DeId, col: DeId) -> f64 {
        self.scores.get(&(doc, col)).copied().unwrap_or(0.0)
    }
}

fn batch_size(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).clamp(1, total.max(1))
}

/// Shuffled, non-overlapping batches of about `fraction` of the documents and
/// columns each; the last batch takes whatever remains on both sides.
pub fn make_mini_batches<R: Rng>(matrix: &TrainingMatrix, fraction: f64, rng: &mut R) -> Vec<MiniBatch> {
    let (d, c) = (matrix.docs.len(), matrix.cols.len());
    if d == 0 || c == 0 {
        return Vec::new();
    }
    let mut docs = matrix.docs.clone();
    let mut cols = matrix.cols.clone();
    docs.shuffle(rng);
    cols.shuffle(rng);
    let m = batch_size(fraction, d);
    let n = batch_size(fraction, c);
    let count = d.div_ceil(m).min(c.div_ceil(n));
    (0..count)
        .map(|i| {
            let last = i + 1 == count;
            let ds = &docs[i * m..if last { d } else { (i + 1) * m }];
            let cs = &cols[i * n..if last { c } else { (i + 1) * n }];
            let relatedness = ds.iter().flat_map(|x| cs.iter().map(move |y| matrix.get(*x, *y))).collect();
            MiniBatch { docs: ds.to_vec(), cols: cs.to_vec(), relatedness }
        })
        .collect()
}
