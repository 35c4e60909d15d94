//! Weakly supervised document/column training pairs: sample, probe indexes
//! with labeling functions, fit a label model, optionally prune LFs against
//! gold labels, and smooth the labels with a discriminator.

pub mod discriminator;
pub mod label_model;
pub mod lf;
pub mod sample;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use discriminator::{encoding_similarities, DiscConfig, Discriminator, PairData};
pub use label_model::{em_fit, fit_label_model, prune_lfs_with_gold, LabelMethod, LabelModel, ProbLabels};
pub use lf::{apply_labeling_functions, builtin_lfs, LabelMatrix, LabelingFunction, SampleIndexes};
pub use sample::{sample_pairs, GoldLabels, PairSample};

use crate::config::LakeConfig;
use crate::corpus::Corpus;
use crate::ids::DeId;
use crate::par::Parallelism;
use crate::profiler::ProfileStore;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub doc: DeId,
    pub col: DeId,
    pub relatedness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingReport {
    pub lf_names: Vec<String>,
    pub votes_per_lf: Vec<usize>,
    pub matrix_entries: usize,
    pub active: Vec<bool>,
    pub gold_accuracy: Option<Vec<f64>>,
    pub model: LabelModel,
    pub discriminator_loss: Vec<f64>,
}

pub fn disc_config(cfg: &LakeConfig) -> DiscConfig {
    DiscConfig {
        hidden: cfg.labels.disc_hidden,
        learning_rate: cfg.labels.disc_lr,
        max_iter: cfg.labels.disc_max_iter,
        tol: cfg.labels.disc_tol,
        seed: cfg.stage_seed("discriminator"),
    }
}

/// LF matrix → (pruning) → label model → discriminator, for a given sample
/// and LF set.
pub fn label_sample(
    sample: &PairSample,
    lfs: &[Box<dyn LabelingFunction + '_>],
    store: &ProfileStore,
    cfg: &LakeConfig,
    gold: Option<&GoldLabels>,
    par: Parallelism,
) -> Result<(Vec<TrainingPair>, LabelingReport)> {
    let lc = &cfg.labels;
    let matrix = apply_labeling_functions(sample, lfs, store, lc.k_probe, par)?;
    let mut active = vec![true; lfs.len()];
    let mut gold_accuracy = None;
    if let Some(gold) = gold {
        match prune_lfs_with_gold(&matrix, gold, lc.prune_rel_threshold, lc.min_gold_pairs) {
            Ok((keep, acc)) => {
                active = keep;
                gold_accuracy = Some(acc);
            }
            Err(Error::InsufficientGold { have, need }) => {
                log::warn!("only {have} gold pairs cover the sample (need {need}); keeping every LF");
            }
            Err(e) => return Err(e),
        }
    }
    let (model, labels) = fit_label_model(&matrix, &active, lc.em_max_iter, lc.em_tol)?;

    let encode = |ids: &[DeId]| -> Result<Vec<Vec<f64>>> {
        ids.iter().map(|id| store.input_encoding(*id).ok_or(Error::UnknownDe(*id))).collect()
    };
    let doc_feats = encode(&sample.docs)?;
    let col_feats = encode(&sample.cols)?;
    let mut pairs = Vec::with_capacity(sample.universe_size());
    for (i, d) in sample.docs.iter().enumerate() {
        for (j, c) in sample.cols.iter().enumerate() {
            pairs.push((i, j, labels.get(&(*d, *c)).copied().unwrap_or(0.0)));
        }
    }
    let pair_feats: Vec<Vec<f64>> =
        pairs.iter().map(|&(i, j, _)| encoding_similarities(&doc_feats[i], &col_feats[j])).collect();
    let data = PairData::new(&doc_feats, &col_feats, &pairs).with_pair_features(&pair_feats).balanced();
    let (disc, history) = Discriminator::train(&data, &disc_config(cfg))?;
    let out = disc
        .predict_pairs(&data)
        .into_iter()
        .zip(&pairs)
        .map(|(p, &(i, j, _))| TrainingPair { doc: sample.docs[i], col: sample.cols[j], relatedness: p })
        .collect();
    let report = LabelingReport {
        votes_per_lf: (0..matrix.num_lfs()).map(|i| matrix.votes_for(i)).collect(),
        lf_names: matrix.lf_names.clone(),
        matrix_entries: matrix.votes.len(),
        active,
        gold_accuracy,
        model,
        discriminator_loss: history,
    };
    Ok((out, report))
}

/// End-to-end training-set generation with the four built-in LFs.
pub fn generate_training_set(
    corpus: &Corpus,
    store: &ProfileStore,
    cfg: &LakeConfig,
    gold: Option<&GoldLabels>,
    par: Parallelism,
) -> Result<(Vec<TrainingPair>, LabelingReport)> {
    let sample = sample_pairs(corpus, cfg.labels.sample_fraction, cfg.stage_seed("sample"))?;
    let indexes = SampleIndexes::build(&sample, store, &cfg.index)?;
    let lfs = builtin_lfs(&indexes, &cfg.labels.floors)?;
    label_sample(&sample, &lfs, store, cfg, gold, par)
}

pub fn save_training_set(pairs: &[TrainingPair], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_training_set(path: &Path) -> Result<Vec<TrainingPair>> {
    let file = std::fs::File::open(path).map_err(|e| Error::artifact(path, e))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
