//! On-disk artifacts of a built lake and the stages that produce them.
//!
//! Each stage records the SHA-256 of what it wrote together with the
//! hashes of the artifacts it read; loading an artifact whose inputs have
//! since changed fails with [`Error::StaleArtifact`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::LakeConfig;
use crate::corpus::Corpus;
use crate::ekg::{materialize_ekg, Ekg, NameIndex, RelationContext};
use crate::indexes::persist::{load_index, save_index, FILES};
use crate::indexes::IndexSet;
use crate::jointrep::{build_joint_index, load_model, save_model, train_joint_model, training_encodings, JointModel};
use crate::jointrep::train::write_loss_csv;
use crate::par::Parallelism;
use crate::profiler::{profile_corpus, ProfileStore};
use crate::query::{Artifacts, Engine};
use crate::weaklabel::{generate_training_set, load_training_set, save_training_set, GoldLabels, TrainingPair};
use crate::{Error, Result};

pub const CATALOG: &str = "catalog";
pub const PROFILES: &str = "profiles";
pub const INDEXES: &str = "indexes";
pub const TRAINING_SET: &str = "training_set";
pub const MODEL: &str = "model";
pub const EKG: &str = "ekg";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub sha256: String,
    /// Hashes of the artifacts (and config section) the stage consumed.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprints {
    pub stages: BTreeMap<String, StageRecord>,
}

/// A directory holding every artifact of one lake.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

fn sha_files(paths: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = std::fs::read(p).map_err(|e| Error::artifact(p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn sha_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(v)?)))
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn catalog_path(&self) -> PathBuf {
        self.root.join("catalog.json")
    }
    pub fn profiles_path(&self) -> PathBuf {
        self.root.join("profiles.bin")
    }
    pub fn index_dir(&self) -> PathBuf {
        self.root.join("indexes")
    }
    pub fn training_set_path(&self) -> PathBuf {
        self.root.join("labels").join("training_set.jsonl")
    }
    pub fn labeling_report_path(&self) -> PathBuf {
        self.root.join("labels").join("report.json")
    }
    pub fn model_path(&self) -> PathBuf {
        self.root.join("model").join("joint_model.json")
    }
    pub fn loss_path(&self) -> PathBuf {
        self.root.join("model").join("loss.csv")
    }
    pub fn joint_index_path(&self) -> PathBuf {
        self.index_dir().join(FILES[4])
    }
    pub fn ekg_dir(&self) -> PathBuf {
        self.root.join("ekg")
    }
    pub fn fingerprints_path(&self) -> PathBuf {
        self.root.join("fingerprints.json")
    }

    fn artifact_files(&self, stage: &str) -> Vec<PathBuf> {
        match stage {
            CATALOG => vec![self.catalog_path()],
            PROFILES => vec![self.profiles_path()],
            INDEXES => FILES[..4].iter().map(|f| self.index_dir().join(f)).collect(),
            TRAINING_SET => vec![self.training_set_path()],
            MODEL => vec![self.model_path(), self.joint_index_path()],
            EKG => vec![self.ekg_dir().join(crate::ekg::graph::NODES_FILE), self.ekg_dir().join(crate::ekg::graph::EDGES_FILE)],
            _ => Vec::new(),
        }
    }

    pub fn fingerprints(&self) -> Result<Fingerprints> {
        let p = self.fingerprints_path();
        if !p.exists() {
            return Ok(Fingerprints::default());
        }
        let bytes = std::fs::read(&p).map_err(|e| Error::artifact(&p, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn has(&self, stage: &str) -> Result<bool> {
        Ok(self.fingerprints()?.stages.contains_key(stage))
    }

    fn record(&self, stage: &str, inputs: &[&str], config: String) -> Result<()> {
        let mut fp = self.fingerprints()?;
        let mut recorded = BTreeMap::new();
        for i in inputs {
            let r = fp.stages.get(*i).ok_or_else(|| Error::artifact(&self.root, format!("{i} has not been built")))?;
            recorded.insert(i.to_string(), r.sha256.clone());
        }
        recorded.insert("config".into(), config);
        let sha256 = sha_files(&self.artifact_files(stage))?;
        fp.stages.insert(stage.to_string(), StageRecord { sha256, inputs: recorded });
        // a rebuilt stage invalidates nothing by itself; dependents are checked on load
        std::fs::write(self.fingerprints_path(), serde_json::to_vec_pretty(&fp)?)?;
        Ok(())
    }

    /// The artifact is unmodified and was built from the current inputs.
    pub fn verify(&self, stage: &str) -> Result<()> {
        let fp = self.fingerprints()?;
        let rec = fp.stages.get(stage).ok_or_else(|| Error::artifact(&self.root, format!("{stage} has not been built")))?;
        let now = sha_files(&self.artifact_files(stage))?;
        if now != rec.sha256 {
            return Err(Error::StaleArtifact { artifact: stage.into(), expected: rec.sha256.clone(), found: now });
        }
        for (input, sha) in &rec.inputs {
            if input == "config" {
                continue;
            }
            let cur = fp.stages.get(input).map(|r| r.sha256.clone()).unwrap_or_default();
            if &cur != sha {
                return Err(Error::StaleArtifact { artifact: format!("{stage} (input {input})"), expected: sha.clone(), found: cur });
            }
        }
        Ok(())
    }

    pub fn save_config(&self, cfg: &LakeConfig) -> Result<()> {
        std::fs::create_dir_all(&self.root)?;
        std::fs::write(self.config_path(), serde_json::to_vec_pretty(cfg)?)?;
        Ok(())
    }

    pub fn load_config(&self) -> Result<LakeConfig> {
        LakeConfig::load(&self.config_path())
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        self.verify(CATALOG)?;
        Corpus::load(&self.catalog_path())
    }

    pub fn load_profiles(&self, cfg: &LakeConfig) -> Result<ProfileStore> {
        self.verify(PROFILES)?;
        ProfileStore::load(&self.profiles_path(), &cfg.profile)
    }

    pub fn load_indexes(&self) -> Result<IndexSet> {
        self.verify(INDEXES)?;
        let mut set = IndexSet::load(&self.index_dir())?;
        set.joint = None;
        if self.has(MODEL)? {
            self.verify(MODEL)?;
            set.joint = Some(load_index(&self.joint_index_path())?);
        }
        Ok(set)
    }

    pub fn load_training_set(&self) -> Result<Vec<TrainingPair>> {
        self.verify(TRAINING_SET)?;
        load_training_set(&self.training_set_path())
    }

    pub fn load_model(&self) -> Result<Option<JointModel>> {
        if !self.has(MODEL)? {
            return Ok(None);
        }
        self.verify(MODEL)?;
        load_model(&self.model_path()).map(Some)
    }

    pub fn load_ekg(&self) -> Result<Option<Ekg>> {
        if !self.has(EKG)? {
            return Ok(None);
        }
        self.verify(EKG)?;
        Ekg::load(&self.ekg_dir()).map(Some)
    }
}

pub fn ingest(ws: &Workspace, lake: &Path, cfg: &LakeConfig, par: Parallelism) -> Result<Corpus> {
    let corpus = Corpus::ingest_lake(lake, &cfg.corpus, par)?;
    write_corpus(ws, &corpus, cfg)?;
    Ok(corpus)
}

/// Persist an already built corpus as the workspace catalog.
pub fn write_corpus(ws: &Workspace, corpus: &Corpus, cfg: &LakeConfig) -> Result<()> {
    ws.save_config(cfg)?;
    corpus.save(&ws.catalog_path())?;
    ws.record(CATALOG, &[], sha_json(&cfg.corpus)?)
}

pub fn profile(ws: &Workspace, cfg: &LakeConfig, par: Parallelism) -> Result<ProfileStore> {
    let corpus = ws.load_corpus()?;
    let store = profile_corpus(&corpus, &cfg.profile, par)?;
    store.save(&ws.profiles_path())?;
    ws.record(PROFILES, &[CATALOG], sha_json(&cfg.profile)?)?;
    Ok(store)
}

pub fn index(ws: &Workspace, cfg: &LakeConfig) -> Result<IndexSet> {
    let corpus = ws.load_corpus()?;
    let store = ws.load_profiles(cfg)?;
    let set = IndexSet::build(&corpus, &store, &cfg.index)?;
    set.save(&ws.index_dir())?;
    ws.record(INDEXES, &[CATALOG, PROFILES], sha_json(&cfg.index)?)?;
    Ok(set)
}

pub fn labels(ws: &Workspace, cfg: &LakeConfig, gold: Option<&GoldLabels>, par: Parallelism) -> Result<Vec<TrainingPair>> {
    let corpus = ws.load_corpus()?;
    let store = ws.load_profiles(cfg)?;
    let (pairs, report) = generate_training_set(&corpus, &store, cfg, gold, par)?;
    std::fs::create_dir_all(ws.root.join("labels"))?;
    save_training_set(&pairs, &ws.training_set_path())?;
    std::fs::write(ws.labeling_report_path(), serde_json::to_vec_pretty(&report)?)?;
    let gold_sha = match gold {
        Some(g) => sha_json(&g.entries.iter().map(|((d, c), l)| (d, c, l)).collect::<Vec<_>>())?,
        None => String::new(),
    };
    let inputs_cfg = sha_json(&(&cfg.labels, cfg.seed, gold_sha))?;
    ws.record(TRAINING_SET, &[CATALOG, PROFILES], inputs_cfg)?;
    Ok(pairs)
}

pub fn train(ws: &Workspace, cfg: &LakeConfig, par: Parallelism) -> Result<JointModel> {
    let corpus = ws.load_corpus()?;
    let store = ws.load_profiles(cfg)?;
    ws.verify(INDEXES)?;
    let pairs = ws.load_training_set()?;
    let enc = training_encodings(&pairs, &store)?;
    let outcome = train_joint_model(&pairs, &enc, &cfg.train)?;
    std::fs::create_dir_all(ws.root.join("model"))?;
    save_model(&outcome.model, &cfg.train, &ws.model_path())?;
    write_loss_csv(&outcome.history, &ws.loss_path())?;
    let joint = build_joint_index(&outcome.model, &corpus, &store, &cfg.index, par)?;
    let params = serde_json::json!({"dim": joint.dim, "backend": joint.backend, "signal": joint.signal});
    save_index(&ws.joint_index_path(), "joint_vector", joint.len(), params, &joint)?;
    ws.record(MODEL, &[TRAINING_SET, PROFILES, INDEXES], sha_json(&cfg.train)?)?;
    Ok(outcome.model)
}

pub fn ekg(ws: &Workspace, cfg: &LakeConfig, par: Parallelism) -> Result<Ekg> {
    let corpus = ws.load_corpus()?;
    let store = ws.load_profiles(cfg)?;
    let indexes = ws.load_indexes()?;
    let names = NameIndex::build(&corpus);
    let ctx = RelationContext { corpus: &corpus, store: &store, indexes: &indexes, names: &names, cfg: &cfg.ekg };
    let graph = materialize_ekg(&ctx, par);
    graph.save(&ws.ekg_dir())?;
    let mut inputs = vec![CATALOG, PROFILES, INDEXES];
    if indexes.joint.is_some() {
        inputs.push(MODEL);
    }
    ws.record(EKG, &inputs, sha_json(&cfg.ekg)?)?;
    Ok(graph)
}

/// Every stage from raw lake to graph.
pub fn build_all(ws: &Workspace, lake: &Path, cfg: &LakeConfig, gold: Option<&GoldLabels>, par: Parallelism) -> Result<()> {
    ingest(ws, lake, cfg, par)?;
    profile(ws, cfg, par)?;
    index(ws, cfg)?;
    labels(ws, cfg, gold, par)?;
    train(ws, cfg, par)?;
    ekg(ws, cfg, par)?;
    Ok(())
}

/// Load every available artifact into a query engine.
pub fn open_engine(ws: &Workspace) -> Result<Engine> {
    let config = ws.load_config()?;
    let corpus = ws.load_corpus()?;
    let store = ws.load_profiles(&config)?;
    let indexes = ws.load_indexes()?;
    let model = ws.load_model()?;
    let ekg = ws.load_ekg()?;
    let fingerprints = ws.fingerprints()?.stages.into_iter().map(|(k, v)| (k, v.sha256)).collect();
    Engine::new(Artifacts { config, corpus, store, indexes, ekg, model, fingerprints })
}
