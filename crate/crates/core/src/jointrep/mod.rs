//! Joint document/column representation learned with triplet loss.

pub mod batches;
pub mod model;
pub mod train;
pub mod triplets;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use batches::{make_mini_batches, MiniBatch, TrainingMatrix};
pub use model::{euclidean, triplet_loss, triplet_loss_grad, JointModel};
pub use train::{
    all_pairs_triplets, batch_loss, batch_loss_and_grad, train_joint_model, train_joint_model_with, EpochStat,
    Encodings, TrainOutcome,
};
pub use triplets::{generate_triplets, InputSpace, OutputSpace, Triplet};

use crate::config::{IndexConfig, TrainConfig};
use crate::indexes::{LshParams, Signal, VectorIndex};
use crate::corpus::{Corpus, TaskTag};
use crate::ids::DeId;
use crate::par::{self, Parallelism};
use crate::profiler::ProfileStore;
use crate::weaklabel::TrainingPair;
use crate::{Error, Result};

/// Input encodings (metadata ‖ content) of every DE in the training set.
pub fn training_encodings(pairs: &[TrainingPair], store: &ProfileStore) -> Result<Encodings> {
    let mut out = BTreeMap::new();
    for p in pairs {
        for id in [p.doc, p.col] {
            if let std::collections::btree_map::Entry::Vacant(e) = out.entry(id) {
                e.insert(store.input_encoding(id).ok_or(Error::UnknownDe(id))?);
            }
        }
    }
    Ok(out)
}

/// Joint embeddings for every document and cross-modal column.
pub fn embed_all(model: &JointModel, corpus: &Corpus, store: &ProfileStore, par: Parallelism) -> BTreeMap<DeId, Vec<f64>> {
    let mut ids: Vec<DeId> = corpus.docs.keys().copied().collect();
    ids.extend(corpus.columns_with(TaskTag::CrossModal).map(|c| c.id));
    ids.sort();
    let out = par::map(&ids, par, |id| store.input_encoding(*id).map(|x| (*id, model.embed(&x))));
    out.into_iter().flatten().collect()
}

/// Vector index over the joint embeddings of documents and cross-modal columns.
pub fn build_joint_index(
    model: &JointModel,
    corpus: &Corpus,
    store: &ProfileStore,
    cfg: &IndexConfig,
    par: Parallelism,
) -> Result<VectorIndex> {
    let entries = embed_all(model, corpus, store, par).into_iter().collect();
    VectorIndex::build(entries, model.output_dim, Signal::JointSemantic, cfg.vector_backend, &LshParams::from(cfg))
}

#[derive(Serialize, Deserialize)]
pub struct SavedModel {
    pub dims: [usize; 3],
    pub config: TrainConfig,
    pub seed: u64,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub fn save_model(model: &JointModel, cfg: &TrainConfig, path: &Path) -> Result<()> {
    let saved = SavedModel {
        dims: [model.input_dim, model.hidden_dim, model.output_dim],
        config: cfg.clone(),
        seed: cfg.seed,
        w1: model.w1.clone(),
        b1: model.b1.clone(),
        w2: model.w2.clone(),
        b2: model.b2.clone(),
    };
    std::fs::write(path, serde_json::to_vec(&saved)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<JointModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::artifact(path, e))?;
    let s: SavedModel = serde_json::from_slice(&bytes)?;
    let [input_dim, hidden_dim, output_dim] = s.dims;
    if s.w1.len() != input_dim * hidden_dim || s.w2.len() != hidden_dim * output_dim {
        return Err(Error::artifact(path, "weight shapes disagree with dims"));
    }
    Ok(JointModel { input_dim, hidden_dim, output_dim, w1: s.w1, b1: s.b1, w2: s.w2, b2: s.b2 })
}
