//! Triplet generation with positive aggregation and hard-negative selection.

use crate::config::HardCutoff;
use crate::ids::DeId;

use super::batches::MiniBatch;
use super::model::{euclidean, JointModel};

/// The space in which hardness distances are measured.
pub trait OutputSpace {
    fn project(&self, x: &[f64]) -> Vec<f64>;
}

impl OutputSpace for JointModel {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        self.embed(x)
    }
}

/// Measures hardness on the input encodings themselves.
pub struct InputSpace;

impl OutputSpace for InputSpace {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub doc: DeId,
    pub pos_cols: Vec<DeId>,
    pub neg_cols: Vec<DeId>,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

pub fn mean(vectors: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0; vectors.first().map_or(0, |v| v.len())];
    for v in vectors {
        out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += x);
    }
    let n = vectors.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// One aggregated triplet per qualifying document row under the hard modes;
/// every positive × negative combination under `AllNegatives`.
pub fn generate_triplets<'a>(
    batch: &MiniBatch,
    encoding: impl Fn(DeId) -> Option<&'a [f64]>,
    pos_threshold: f64,
    cutoff: HardCutoff,
    space: &dyn OutputSpace,
) -> Vec<Triplet> {
    let cols: Vec<Option<&[f64]>> = batch.cols.iter().map(|c| encoding(*c)).collect();
    let col_out: Vec<Option<Vec<f64>>> = match cutoff {
        HardCutoff::AllNegatives => vec![None; cols.len()],
        _ => cols.iter().map(|c| c.map(|x| space.project(x))).collect(),
    };
    let mut out = Vec::new();
    for (row, doc) in batch.docs.iter().enumerate() {
        let Some(anchor) = encoding(*doc) else { continue };
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (j, enc) in cols.iter().enumerate() {
            if enc.is_none() {
                continue;
            }
            if batch.score(row, j) >= pos_threshold {
                pos.push(j);
            } else {
                neg.push(j);
            }
        }
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        if cutoff == HardCutoff::AllNegatives {
            for &p in &pos {
                for &n in &neg {
                    out.push(Triplet {
                        doc: *doc,
                        pos_cols: vec![batch.cols[p]],
                        neg_cols: vec![batch.cols[n]],
                        anchor: anchor.to_vec(),
                        positive: cols[p].unwrap().to_vec(),
                        negative: cols[n].unwrap().to_vec(),
                    });
                }
            }
            continue;
        }
        let a_out = space.project(anchor);
        let dists: Vec<f64> = neg.iter().map(|&n| euclidean(&a_out, col_out[n].as_ref().unwrap())).collect();
        let limit = match cutoff {
            HardCutoff::AvgNegativeDistance => dists.iter().sum::<f64>() / dists.len() as f64,
            HardCutoff::MedianNegativeDistance => median(dists.clone()),
            HardCutoff::AllNegatives => unreachable!(),
        };
        let hard: Vec<usize> = neg.iter().zip(&dists).filter(|(_, d)| **d <= limit).map(|(n, _)| *n).collect();
        let pos_vecs: Vec<&[f64]> = pos.iter().map(|&p| cols[p].unwrap()).collect();
        let neg_vecs: Vec<&[f64]> = hard.iter().map(|&n| cols[n].unwrap()).collect();
        out.push(Triplet {
            doc: *doc,
            pos_cols: pos.iter().map(|&p| batch.cols[p]).collect(),
            neg_cols: hard.iter().map(|&n| batch.cols[n]).collect(),
            anchor: anchor.to_vec(),
            positive: mean(&pos_vecs),
            negative: mean(&neg_vecs),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::DeKind;
    use std::collections::BTreeMap;

    fn col(i: usize) -> DeId {
        DeId::derive(DeKind::Column, "c", &i.to_string())
    }

    /// The worked row: c3, c5, c17, c20 related; c1 and c8 close negatives; c2 far.
    fn worked_row() -> (MiniBatch, BTreeMap<DeId, Vec<f64>>) {
        let doc = DeId::derive(DeKind::Document, "d", "0");
        let ids = [1, 2, 3, 5, 8, 17, 20];
        let related = [3, 5, 17, 20];
        let mut enc = BTreeMap::new();
        enc.insert(doc, vec![0.0, 0.0]);
        for &i in &ids {
            let v = match i {
                1 => vec![1.0, 0.0],
                8 => vec![0.0, 1.0],
                2 => vec![4.0, 0.0],
                _ => vec![0.1 * i as f64, 0.2],
            };
            enc.insert(col(i), v);
        }
        let cols: Vec<DeId> = ids.iter().map(|&i| col(i)).collect();
        let relatedness = ids.iter().map(|i| if related.contains(i) { 0.9 } else { 0.1 }).collect();
        (MiniBatch { docs: vec![doc], cols, relatedness }, enc)
    }

    #[test]
    fn worked_example_aggregates() {
        let (batch, enc) = worked_row();
        let t = generate_triplets(&batch, |id| enc.get(&id).map(|v| v.as_slice()), 0.5, HardCutoff::AvgNegativeDistance, &InputSpace);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].pos_cols, vec![col(3), col(5), col(17), col(20)]);
        assert_eq!(t[0].neg_cols, vec![col(1), col(8)]);
        let expect_pos = mean(&[&enc[&col(3)][..], &enc[&col(5)], &enc[&col(17)], &enc[&col(20)]]);
        assert_eq!(t[0].positive, expect_pos);
        assert_eq!(t[0].negative, vec![0.5, 0.5]);
    }

    #[test]
    fn all_negatives_enumerates_products() {
        let (batch, enc) = worked_row();
        let t = generate_triplets(&batch, |id| enc.get(&id).map(|v| v.as_slice()), 0.5, HardCutoff::AllNegatives, &InputSpace);
        assert_eq!(t.len(), 4 * 3);
    }

    #[test]
    fn rows_without_positives_are_skipped() {
        let (mut batch, enc) = worked_row();
        batch.relatedness.iter_mut().for_each(|r| *r = 0.0);
        let t = generate_triplets(&batch, |id| enc.get(&id).map(|v| v.as_slice()), 0.5, HardCutoff::AvgNegativeDistance, &InputSpace);
        assert!(t.is_empty());
    }
}
