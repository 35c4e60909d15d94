//! Triplet-loss training loop and re-embedding.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batches::{make_mini_batches, MiniBatch, TrainingMatrix};
use super::model::{triplet_loss, triplet_loss_grad, JointModel};
use super::triplets::{generate_triplets, Triplet};
use crate::config::{HardCutoff, TrainConfig};
use crate::ids::DeId;
use crate::weaklabel::TrainingPair;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub triplet_count: usize,
}

/// Mean triplet loss over `triplets` and its parameter gradient. Identical
/// inputs (a document anchoring several triplets, a column reused as a single
/// positive) share one forward/backward pass.
pub fn batch_loss_and_grad(model: &JointModel, triplets: &[Triplet], margin: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.num_params()];
    if triplets.is_empty() {
        return (0.0, grad);
    }
    let mut index: HashMap<(u8, &[DeId]), usize> = HashMap::new();
    let mut inputs: Vec<&[f64]> = Vec::new();
    let mut node = |key, x| {
        *index.entry(key).or_insert_with(|| {
            inputs.push(x);
            inputs.len() - 1
        })
    };
    let ids: Vec<[usize; 3]> = triplets
        .iter()
        .map(|t| {
            [
                node((0, std::slice::from_ref(&t.doc)), t.anchor.as_slice()),
                node((1, t.pos_cols.as_slice()), t.positive.as_slice()),
                node((2, t.neg_cols.as_slice()), t.negative.as_slice()),
            ]
        })
        .collect();
    let forwards: Vec<_> = inputs.iter().map(|x| model.forward(x)).collect();
    let mut g_out = vec![vec![0.0; model.output_dim]; inputs.len()];
    let n = triplets.len() as f64;
    let mut loss = 0.0;
    for [a, p, q] in &ids {
        let (fa, fp, fq) = (&forwards[*a].out, &forwards[*p].out, &forwards[*q].out);
        loss += triplet_loss(fa, fp, fq, margin);
        if let Some([ga, gp, gq]) = triplet_loss_grad(fa, fp, fq, margin) {
            for (slot, g) in [(*a, ga), (*p, gp), (*q, gq)] {
                g_out[slot].iter_mut().zip(g).for_each(|(o, v)| *o += v / n);
            }
        }
    }
    for ((x, f), g) in inputs.iter().zip(&forwards).zip(&g_out) {
        if g.iter().any(|v| *v != 0.0) {
            model.backward(x, f, g, &mut grad);
        }
    }
    (loss / n, grad)
}

pub fn batch_loss(model: &JointModel, triplets: &[Triplet], margin: f64) -> f64 {
    if triplets.is_empty() {
        return 0.0;
    }
    let total: f64 = triplets
        .iter()
        .map(|t| triplet_loss(&model.embed(&t.anchor), &model.embed(&t.positive), &model.embed(&t.negative), margin))
        .sum();
    total / triplets.len() as f64
}

/// Encodings for every DE in the training set, keyed by id.
pub type Encodings = BTreeMap<DeId, Vec<f64>>;

pub struct TrainOutcome {
    pub model: JointModel,
    pub history: Vec<EpochStat>,
    /// Extra per-epoch measurement, when an evaluator was supplied.
    pub evaluations: Vec<f64>,
    pub converged: bool,
}

pub fn train_joint_model(pairs: &[TrainingPair], encodings: &Encodings, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_joint_model_with(pairs, encodings, cfg, None::<fn(&JointModel) -> f64>)
}

/// Trains with fresh random mini-batches each epoch until the epoch loss
/// changes by less than `convergence_delta` or `max_epochs` is reached.
pub fn train_joint_model_with<F: Fn(&JointModel) -> f64>(
    pairs: &[TrainingPair],
    encodings: &Encodings,
    cfg: &TrainConfig,
    evaluate: Option<F>,
) -> Result<TrainOutcome> {
    if pairs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let input_dim = encodings.values().next().map_or(0, Vec::len);
    let mut model = JointModel::new(input_dim, cfg.hidden_dim, cfg.output_dim, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6a09_e667);
    let matrix = TrainingMatrix::new(pairs);
    let lookup = |id: DeId| encodings.get(&id).map(Vec::as_slice);
    let mut history = Vec::new();
    let mut evaluations = Vec::new();
    let mut converged = false;
    for epoch in 0..cfg.max_epochs {
        let batches: Vec<MiniBatch> = make_mini_batches(&matrix, cfg.batch_fraction, &mut rng);
        let mut total = 0.0;
        let mut count = 0;
        for batch in &batches {
            let triplets = generate_triplets(batch, lookup, cfg.pos_threshold, cfg.hard_cutoff, &model);
            if triplets.is_empty() {
                continue;
            }
            let (loss, grad) = batch_loss_and_grad(&model, &triplets, cfg.margin);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { stage: "joint", step: epoch });
            }
            total += loss * triplets.len() as f64;
            count += triplets.len();
            let mut params = model.params();
            params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= cfg.learning_rate * g);
            model.set_params(&params);
        }
        if count == 0 {
            if epoch == 0 {
                return Err(Error::NoTriplets);
            }
            continue;
        }
        if !model.is_finite() {
            return Err(Error::NonFiniteLoss { stage: "joint", step: epoch });
        }
        let loss = total / count as f64;
        if let Some(eval) = &evaluate {
            evaluations.push(eval(&model));
        }
        let done = history.last().is_some_and(|prev: &EpochStat| (prev.loss - loss).abs() < cfg.convergence_delta);
        history.push(EpochStat { epoch: epoch + 1, loss, triplet_count: count });
        if done {
            converged = true;
            break;
        }
    }
    Ok(TrainOutcome { model, history, evaluations, converged })
}

/// Every position×negative combination over the whole training set, used
/// as a mode-independent yardstick when comparing sampling strategies.
pub fn all_pairs_triplets(pairs: &[TrainingPair], encodings: &Encodings, pos_threshold: f64) -> Vec<Triplet> {
    let matrix = TrainingMatrix::new(pairs);
    let relatedness = matrix.docs.iter().flat_map(|d| matrix.cols.iter().map(|c| matrix.get(*d, *c))).collect();
    let batch = MiniBatch { docs: matrix.docs.clone(), cols: matrix.cols.clone(), relatedness };
    let lookup = |id: DeId| encodings.get(&id).map(Vec::as_slice);
    generate_triplets(&batch, lookup, pos_threshold, HardCutoff::AllNegatives, &super::triplets::InputSpace)
}

pub fn write_loss_csv(history: &[EpochStat], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::artifact(path, e))?;
    w.write_record(["epoch", "loss", "triplet_count"]).map_err(|e| Error::artifact(path, e))?;
    for s in history {
        w.write_record([s.epoch.to_string(), format!("{:.17e}", s.loss), s.triplet_count.to_string()])
            .map_err(|e| Error::artifact(path, e))?;
    }
    w.flush()?;
    Ok(())
}
