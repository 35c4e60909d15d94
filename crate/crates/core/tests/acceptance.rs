//! Acceptance run: one PASS/FAIL line per criterion with the measured values.
//!
//! Failures are reported but do not fail `cargo test` unless
//! `ACCEPTANCE_STRICT=1` is set.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lakelens_core::config::{HardCutoff, Relation, TrainConfig};
use lakelens_core::corpus::{Corpus, CorpusBuilder};
use lakelens_core::ekg::{brute_force_matching, materialize_ekg, max_bipartite_matching, DocSpace, NameIndex, RelationContext};
use lakelens_core::eval::{
    build_planted, generate_synthetic_lake, mqcr, precision_recall_at_k, r_precision, run_benchmark, BenchSystem,
    BenchmarkReport, SynthTable, SyntheticLake, SyntheticLakeSpec, Task,
};
use lakelens_core::indexes::IndexSet;
use lakelens_core::jointrep::{
    all_pairs_triplets, batch_loss, batch_loss_and_grad, generate_triplets, train_joint_model_with, training_encodings,
    triplet_loss, InputSpace, JointModel, MiniBatch, Triplet,
};
use lakelens_core::pipeline::Workspace;
use lakelens_core::profiler::{estimate_containment, exact_containment, profile_corpus, HashFamily, ProfileStore, SketchBundle};
use lakelens_core::profiler::minhash::exact_jaccard;
use lakelens_core::query::Engine;
use lakelens_core::weaklabel::{
    apply_labeling_functions, fit_label_model, prune_lfs_with_gold, sample_pairs, Discriminator, GoldLabels,
    LabelingFunction, PairData, PairSample,
};
use lakelens_core::{DeId, DeKind, LakeConfig, Parallelism, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn check(name: &str, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let mark = if pass { "PASS" } else { "FAIL" };
    println!("{mark}  {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    pass
}

fn id(kind: DeKind, tag: &str, i: usize) -> DeId {
    DeId::derive(kind, tag, &i.to_string())
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-12)
}

fn central_differences(params: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            p[i] = params[i] + h;
            let up = f(&p);
            p[i] = params[i] - h;
            let down = f(&p);
            p[i] = params[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Corpus, sketches and indexes held in memory.
struct MemLake {
    corpus: Corpus,
    store: ProfileStore,
    indexes: IndexSet,
    names: NameIndex,
    cfg: LakeConfig,
}

impl MemLake {
    fn new(corpus: Corpus, cfg: LakeConfig) -> Result<Self> {
        let store = profile_corpus(&corpus, &cfg.profile, Parallelism::default())?;
        let indexes = IndexSet::build(&corpus, &store, &cfg.index)?;
        let names = NameIndex::build(&corpus);
        Ok(MemLake { corpus, store, indexes, names, cfg })
    }

    fn from_synthetic(lake: &SyntheticLake) -> Result<Self> {
        let cfg = LakeConfig::default();
        MemLake::new(lake.corpus(&cfg.corpus, Parallelism::default())?, cfg)
    }

    fn ctx(&self) -> RelationContext<'_> {
        RelationContext { corpus: &self.corpus, store: &self.store, indexes: &self.indexes, names: &self.names, cfg: &self.cfg.ekg }
    }
}

fn sketch_fidelity() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1de);
    let family = HashFamily::new(512, 0x5eed_0001);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for pair in 0..200 {
        let na = rng.random_range(100..=500);
        let nb = rng.random_range(100..=500);
        let shared = rng.random_range(0..=na.min(nb));
        let a: BTreeSet<String> =
            (0..na).map(|i| if i < shared { format!("p{pair}s{i}") } else { format!("p{pair}a{i}") }).collect();
        let b: BTreeSet<String> =
            (0..nb).map(|i| if i < shared { format!("p{pair}s{i}") } else { format!("p{pair}b{i}") }).collect();
        let sa = family.signature(a.iter().map(String::as_str))?;
        let sb = family.signature(b.iter().map(String::as_str))?;
        let err = (estimate_containment(&sa, &sb)? - exact_containment(&a, &b)?).abs();
        worst = worst.max(err);
        if err <= 0.1 {
            within += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let share = within as f64 / 200.0;
    outcome(share >= 0.95 && secs < 10.0, format!("{within}/200 pairs within 0.1 ({:.1}%), worst {worst:.3}, {secs:.2}s", share * 100.0))
}

fn asymmetric_pair(seed: u64, na: usize) -> Result<(f64, f64)> {
    let family = HashFamily::new(512, seed);
    let a: BTreeSet<String> = (0..na).map(|i| format!("v{i}")).collect();
    let b: BTreeSet<String> = (0..100 * na).map(|i| format!("v{i}")).collect();
    let sa = family.signature(a.iter().map(String::as_str))?;
    let sb = family.signature(b.iter().map(String::as_str))?;
    Ok((estimate_containment(&sa, &sb)?, exact_jaccard(&a, &b)))
}

fn containment_asymmetry() -> Result<Outcome> {
    let (est, jac) = asymmetric_pair(7, 100)?;
    let mut hits = 0;
    for seed in 0..200 {
        if asymmetric_pair(1000 + seed, 100)?.0 >= 0.9 {
            hits += 1;
        }
    }
    outcome(
        est >= 0.9 && jac <= 0.02,
        format!("|A|=100, |B|=10000: estimated containment {est:.3}, exact Jaccard {jac:.4} (estimate >= 0.9 on {hits}/200 other hash seeds)"),
    )
}

fn eq1_exactness() -> Result<Outcome> {
    let o = [0.0, 0.0];
    type Case<'a> = (&'a [f64], &'a [f64], &'a [f64], f64, f64);
    let cases: [Case; 6] = [
        (&o, &[3.0, 4.0], &[6.0, 8.0], 0.2, 0.0),
        (&o, &[6.0, 8.0], &[3.0, 4.0], 0.2, 5.2),
        (&o, &[0.0, 2.0], &[1.0, 0.0], 0.2, 1.2),
        (&o, &[1.0, 0.0], &[0.0, 1.0], 0.2, 0.2),
        (&o, &[0.6, 0.8], &[0.6, 0.8], 0.2, 0.2),
        (&[1.0, 1.0], &[1.0, 1.0], &[4.0, 5.0], 0.5, 0.0),
    ];
    let mut worst: f64 = 0.0;
    for (a, p, n, beta, want) in cases {
        let got = triplet_loss(a, p, n, beta);
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    let boundary = triplet_loss(&[0.1, -0.3, 0.5], &[0.2, 0.2, 0.2], &[0.2, 0.2, 0.2], 0.2);
    let pass = worst <= 4.0 * f64::EPSILON && boundary == 0.2;
    outcome(pass, format!("6 hand cases, max relative deviation {worst:.2e}; pos_out == neg_out gives {boundary}"))
}

fn joint_gradient(rng: &mut ChaCha8Rng, seed: u64) -> f64 {
    let input = rng.random_range(3..=10);
    let hidden = rng.random_range(2..=8);
    let output = rng.random_range(2..=6);
    let model = JointModel::new(input, hidden, output, seed);
    let n_cols = 6;
    let cols: Vec<Vec<f64>> = (0..n_cols).map(|_| random_vec(rng, input)).collect();
    let triplets: Vec<Triplet> = (0..rng.random_range(1..=4))
        .map(|t| {
            let mut order: Vec<usize> = (0..n_cols).collect();
            order.shuffle(rng);
            let np = rng.random_range(1..=3);
            let nn = rng.random_range(1..=3);
            let (pos, neg) = (&order[..np], &order[np..np + nn]);
            let mean = |idx: &[usize]| {
                let mut m = vec![0.0; input];
                for &i in idx {
                    m.iter_mut().zip(&cols[i]).for_each(|(a, b)| *a += b / idx.len() as f64);
                }
                m
            };
            Triplet {
                doc: id(DeKind::Document, "g", t),
                pos_cols: pos.iter().map(|&i| id(DeKind::Column, "g", i)).collect(),
                neg_cols: neg.iter().map(|&i| id(DeKind::Column, "g", i)).collect(),
                anchor: random_vec(rng, input),
                positive: mean(pos),
                negative: mean(neg),
            }
        })
        .collect();
    // margin above the largest possible distance keeps every hinge active
    let margin = 3.0;
    let (_, analytic) = batch_loss_and_grad(&model, &triplets, margin);
    let numeric = central_differences(&model.params(), |p| {
        let mut m = model.clone();
        m.set_params(p);
        batch_loss(&m, &triplets, margin)
    });
    rel_error(&analytic, &numeric)
}

fn discriminator_gradient(rng: &mut ChaCha8Rng, seed: u64) -> f64 {
    let (dd, cd, pd) = (rng.random_range(2..=6), rng.random_range(2..=6), rng.random_range(0..=2));
    let hidden = rng.random_range(2..=6);
    let docs: Vec<Vec<f64>> = (0..4).map(|_| random_vec(rng, dd)).collect();
    let cols: Vec<Vec<f64>> = (0..5).map(|_| random_vec(rng, cd)).collect();
    let pairs: Vec<(usize, usize, f64)> =
        (0..12).map(|i| (rng.random_range(0..4), rng.random_range(0..5), if i % 3 == 0 { 1.0 } else { rng.random_range(0.0..0.6) })).collect();
    let feats: Vec<Vec<f64>> = pairs.iter().map(|_| random_vec(rng, pd)).collect();
    let data = PairData::new(&docs, &cols, &pairs).with_pair_features(&feats).balanced();
    let disc = Discriminator::with_pair_dim(dd, cd, pd, hidden, seed);
    let (_, analytic) = disc.loss_and_grad(&data);
    let numeric = central_differences(&disc.params, |p| {
        let mut d = disc.clone();
        d.params = p.to_vec();
        d.loss(&data)
    });
    rel_error(&analytic, &numeric)
}

fn gradient_correctness() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ad);
    let joint: Vec<f64> = (0..20).map(|s| joint_gradient(&mut rng, s)).collect();
    let disc: Vec<f64> = (0..20).map(|s| discriminator_gradient(&mut rng, 100 + s)).collect();
    let jmax = joint.iter().copied().fold(0.0, f64::max);
    let dmax = disc.iter().copied().fold(0.0, f64::max);
    outcome(
        jmax <= 1e-4 && dmax <= 1e-4,
        format!("20 configs each; max relative error joint {jmax:.2e}, discriminator {dmax:.2e}"),
    )
}

/// Votes exactly the planted columns of each document.
struct PerfectLf(BTreeMap<DeId, Vec<DeId>>);
/// Votes a fixed pseudo-random handful of columns per document.
struct RandomLf(Vec<DeId>);
/// Votes every column that is not planted for the document.
struct InvertedLf(BTreeMap<DeId, Vec<DeId>>, Vec<DeId>);

impl LabelingFunction for PerfectLf {
    fn name(&self) -> String {
        "perfect".into()
    }
    fn probe(&self, doc: &SketchBundle, k: usize) -> Result<Vec<DeId>> {
        Ok(self.0.get(&doc.owner).map(|v| v.iter().take(k).copied().collect()).unwrap_or_default())
    }
}

impl LabelingFunction for RandomLf {
    fn name(&self) -> String {
        "random".into()
    }
    fn probe(&self, doc: &SketchBundle, _k: usize) -> Result<Vec<DeId>> {
        let seed = u64::from_le_bytes(doc.owner.as_bytes()[..8].try_into().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.0.choose_multiple(&mut rng, 3).copied().collect())
    }
}

impl LabelingFunction for InvertedLf {
    fn name(&self) -> String {
        "inverted".into()
    }
    fn probe(&self, doc: &SketchBundle, _k: usize) -> Result<Vec<DeId>> {
        let planted: BTreeSet<&DeId> = self.0.get(&doc.owner).map(|v| v.iter().collect()).unwrap_or_default();
        Ok(self.1.iter().filter(|c| !planted.contains(c)).copied().collect())
    }
}

fn label_accuracy(labels: &BTreeMap<(DeId, DeId), f64>, truth: &BTreeSet<(DeId, DeId)>) -> f64 {
    let right = labels.iter().filter(|(k, p)| (**p >= 0.5) == truth.contains(k)).count();
    right as f64 / labels.len().max(1) as f64
}

fn label_model_sanity() -> Result<Outcome> {
    let spec = SyntheticLakeSpec { seed: 5, n_tables: 20, n_docs: 200, planted_fks: 4, unionable_families: 0, ..Default::default() };
    let lake = generate_synthetic_lake(&spec)?;
    let mem = MemLake::from_synthetic(&lake)?;
    let cfg = &mem.cfg;
    let truth = lake.truth[&Task::DocToColumn].pairs();
    let sample: PairSample = sample_pairs(&mem.corpus, 0.5, cfg.stage_seed("sample"))?;
    let mut planted: BTreeMap<DeId, Vec<DeId>> = BTreeMap::new();
    for &(d, c) in &truth {
        if sample.contains(d, c) {
            planted.entry(d).or_default().push(c);
        }
    }
    let k = sample.cols.len();
    let base: Vec<Box<dyn LabelingFunction>> = vec![Box::new(PerfectLf(planted.clone())), Box::new(RandomLf(sample.cols.clone()))];
    let m = apply_labeling_functions(&sample, &base, &mem.store, k, Parallelism::default())?;
    let (_, labels) = fit_label_model(&m, &[true, true], cfg.labels.em_max_iter, cfg.labels.em_tol)?;
    let agree = labels.iter().filter(|(key, p)| (**p >= 0.5) == (m.vote_vector(key.0, key.1) & 1 != 0)).count();
    let agreement = agree as f64 / labels.len() as f64;
    let acc_clean = label_accuracy(&labels, &truth);

    let mut with_adv = base;
    with_adv.push(Box::new(InvertedLf(planted, sample.cols.clone())));
    let m3 = apply_labeling_functions(&sample, &with_adv, &mem.store, k, Parallelism::default())?;
    let gold = GoldLabels::from_truth(&sample, &truth, cfg.labels.gold_fraction, cfg.labels.min_gold_pairs, cfg.stage_seed("gold"));
    let (active, acc) = prune_lfs_with_gold(&m3, &gold, cfg.labels.prune_rel_threshold, cfg.labels.min_gold_pairs)?;
    let (_, pruned_labels) = fit_label_model(&m3, &active, cfg.labels.em_max_iter, cfg.labels.em_tol)?;
    let acc_pruned = label_accuracy(&pruned_labels, &truth);
    let (_, raw_labels) = fit_label_model(&m3, &[true; 3], cfg.labels.em_max_iter, cfg.labels.em_tol)?;
    let acc_unpruned = label_accuracy(&raw_labels, &truth);

    let pass = agreement >= 0.95 && !active[2] && acc_pruned >= acc_clean && acc_pruned >= acc_unpruned;
    outcome(
        pass,
        format!(
            "agreement with perfect LF {:.1}% over {} voted pairs; gold accuracies {:?} -> active {:?}; \
             planted-pair accuracy {:.3} before, {:.3} after pruning ({:.3} if the inverted LF were kept)",
            agreement * 100.0,
            labels.len(),
            acc.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            active,
            acc_clean,
            acc_pruned,
            acc_unpruned
        ),
    )
}

struct PlantedRun {
    _dir: tempfile::TempDir,
    lake: SyntheticLake,
    lake_dir: std::path::PathBuf,
    ws_dir: std::path::PathBuf,
    engine: Engine,
    joint: BenchmarkReport,
    solo: BenchmarkReport,
}

fn planted_spec(seed: u64) -> SyntheticLakeSpec {
    SyntheticLakeSpec { seed, n_tables: 50, n_docs: 3000, text_columns: 4, ..Default::default() }
}

fn planted_run(seed: u64, par: Parallelism) -> Result<PlantedRun> {
    let dir = tempfile::tempdir()?;
    let lake = generate_synthetic_lake(&planted_spec(seed))?;
    let cfg = LakeConfig { seed, ..Default::default() };
    let (lake_dir, ws_dir) = (dir.path().join("lake"), dir.path().join("ws"));
    let engine = build_planted(&lake, &lake_dir, &ws_dir, &cfg, par)?;
    let truth = &lake.truth[&Task::DocToTable];
    let joint = run_benchmark(&engine, truth, &[1, 5, 10], BenchSystem { doc_space: Some(DocSpace::Joint) }, par)?;
    let solo = run_benchmark(&engine, truth, &[1, 5, 10], BenchSystem { doc_space: Some(DocSpace::Solo) }, par)?;
    Ok(PlantedRun { _dir: dir, lake, lake_dir, ws_dir, engine, joint, solo })
}

fn joint_vs_solo(runs: &mut Vec<PlantedRun>) -> Result<Outcome> {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for seed in [1, 2, 3] {
        let run = planted_run(seed, Parallelism::default())?;
        let (j, s) = (run.joint.precision_at(5).unwrap_or(0.0), run.solo.precision_at(5).unwrap_or(0.0));
        pass &= j >= s;
        parts.push(format!("seed {seed}: joint {j:.4} vs solo {s:.4}"));
        runs.push(run);
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    let l = &runs[0].lake;
    outcome(
        pass,
        format!(
            "Doc->Table P@5 on {} tables / {} docs: {}; {secs:.0}s for 3 builds",
            l.tables.len(),
            l.docs.len(),
            parts.join(", ")
        ),
    )
}

fn first_epoch_at_or_below(evals: &[f64], level: f64) -> Option<usize> {
    evals.iter().position(|e| *e <= level + 1e-12).map(|i| i + 1)
}

fn hard_sampling(run: &PlantedRun) -> Result<Outcome> {
    let ws = Workspace::new(&run.ws_dir);
    let cfg = ws.load_config()?;
    let pairs = ws.load_training_set()?;
    let store = ws.load_profiles(&cfg)?;
    let enc = training_encodings(&pairs, &store)?;
    let yard = all_pairs_triplets(&pairs, &enc, cfg.train.pos_threshold);
    let margin = cfg.train.margin;
    let eval = |m: &JointModel| batch_loss(m, &yard, margin);
    let all_cfg = TrainConfig { hard_cutoff: HardCutoff::AllNegatives, ..cfg.train.clone() };
    let hard_cfg = TrainConfig { hard_cutoff: HardCutoff::AvgNegativeDistance, ..cfg.train.clone() };
    let all = train_joint_model_with(&pairs, &enc, &all_cfg, Some(eval))?;
    let hard = train_joint_model_with(&pairs, &enc, &hard_cfg, Some(eval))?;
    let level = *all.evaluations.last().unwrap_or(&f64::INFINITY);
    let e_all = first_epoch_at_or_below(&all.evaluations, level);
    let e_hard = first_epoch_at_or_below(&hard.evaluations, level);
    let fmt = |e: Option<usize>| e.map_or("never".to_string(), |e| e.to_string());
    let ratio = match (e_all, e_hard) {
        (Some(a), Some(h)) => format!("{:.2}", a as f64 / h as f64),
        _ => "n/a".into(),
    };
    let pass = matches!((e_all, e_hard), (Some(a), Some(h)) if h < a);
    outcome(
        pass,
        format!(
            "all-pairs loss level {level:.5} ({} yardstick triplets): AllNegatives first reaches it at epoch {} \
             (ran {}), AvgNegativeDistance at epoch {} (ran {}); speed-up ratio {ratio}",
            yard.len(),
            fmt(e_all),
            all.history.len(),
            fmt(e_hard),
            hard.history.len()
        ),
    )
}

fn triplet_cardinality() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xca7d);
    let mut hard_max = 0usize;
    let mut all_exact = true;
    let mut batches = 0;
    for _ in 0..100 {
        let (nd, nc, dim) = (rng.random_range(1..=8), rng.random_range(2..=10), 4);
        let docs: Vec<DeId> = (0..nd).map(|i| id(DeKind::Document, "t", i)).collect();
        let cols: Vec<DeId> = (0..nc).map(|i| id(DeKind::Column, "t", i)).collect();
        let relatedness: Vec<f64> = (0..nd * nc).map(|_| if rng.random_bool(0.3) { rng.random_range(0.5..=1.0) } else { rng.random_range(0.0..0.5) }).collect();
        let enc: BTreeMap<DeId, Vec<f64>> = docs.iter().chain(&cols).map(|d| (*d, random_vec(&mut rng, dim))).collect();
        let batch = MiniBatch { docs: docs.clone(), cols: cols.clone(), relatedness: relatedness.clone() };
        let lookup = |i: DeId| enc.get(&i).map(Vec::as_slice);
        for mode in [HardCutoff::AvgNegativeDistance, HardCutoff::MedianNegativeDistance] {
            let ts = generate_triplets(&batch, lookup, 0.5, mode, &InputSpace);
            for d in &docs {
                hard_max = hard_max.max(ts.iter().filter(|t| t.doc == *d).count());
            }
        }
        let ts = generate_triplets(&batch, lookup, 0.5, HardCutoff::AllNegatives, &InputSpace);
        for (r, d) in docs.iter().enumerate() {
            let p = (0..nc).filter(|c| relatedness[r * nc + c] >= 0.5).count();
            let q = nc - p;
            all_exact &= ts.iter().filter(|t| t.doc == *d).count() == p * q;
        }
        batches += 1;
    }
    outcome(
        hard_max <= 1 && all_exact,
        format!("{batches} random batches: hard modes at most {hard_max} triplet per row; AllNegatives p*q per row: {all_exact}"),
    )
}

fn pkfk_edges(mem: &MemLake) -> BTreeSet<(DeId, DeId)> {
    let g = materialize_ekg(&mem.ctx(), Parallelism::default());
    g.edges.iter().filter(|e| e.relation == Relation::PkFk).map(|e| (e.src, e.dst)).collect()
}

fn pkfk() -> Result<Outcome> {
    let spec = SyntheticLakeSpec { seed: 9, n_tables: 30, n_docs: 30, planted_fks: 10, unionable_families: 0, noise_rate: 0.0, ..Default::default() };
    let mut lake = generate_synthetic_lake(&spec)?;
    let truth = lake.truth[&Task::PkFk].pairs();
    let found = pkfk_edges(&MemLake::from_synthetic(&lake)?);
    let hit = truth.iter().filter(|p| found.contains(p)).count();
    let recall = hit as f64 / truth.len() as f64;
    let precision = if found.is_empty() { 0.0 } else { found.iter().filter(|p| truth.contains(p)).count() as f64 / found.len() as f64 };

    let &(fk, pk) = truth.iter().next().expect("planted fks");
    let pk_table = lake.tables.iter().find(|t| t.headers.iter().any(|h| t.column_id(h) == pk)).map(|t| t.name.clone()).unwrap();
    lake.inject_duplicate_keys(&pk_table, 0.05, 17)?;
    let after = pkfk_edges(&MemLake::from_synthetic(&lake)?);
    let removed: BTreeSet<_> = found.difference(&after).copied().collect();
    let added = after.difference(&found).count();
    let into_pk: BTreeSet<_> = found.iter().filter(|e| e.1 == pk).copied().collect();
    let exact_removal = removed == into_pk && added == 0 && removed.contains(&(fk, pk));
    outcome(
        recall == 1.0 && precision >= 0.9 && exact_removal,
        format!(
            "{} declared FKs: recall {recall:.3}, precision {precision:.3} ({} edges); 5% duplicate keys in {pk_table}: \
             {} edge(s) removed ({} into that key), {added} added",
            truth.len(),
            found.len(),
            removed.len(),
            into_pk.len()
        ),
    )
}

fn matching_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4a7c);
    let mut equal = 0;
    let mut valid = true;
    for i in 0..500 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        // dyadic scores keep every sum exact
        let m: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rng.random_range(0..=64) as f64 / 64.0).collect()).collect();
        let min = if i % 2 == 0 { 0.0 } else { 0.25 };
        let got = max_bipartite_matching(&m, min);
        let want = brute_force_matching(&m, min);
        let rows: BTreeSet<usize> = got.pairs.iter().map(|p| p.0).collect();
        let cols: BTreeSet<usize> = got.pairs.iter().map(|p| p.1).collect();
        let sum: f64 = got.pairs.iter().map(|&(a, b)| m[a][b]).sum();
        valid &= rows.len() == got.pairs.len() && cols.len() == got.pairs.len() && sum == got.total;
        valid &= got.pairs.iter().all(|&(a, b)| m[a][b] >= min);
        if got.total == want {
            equal += 1;
        }
    }
    outcome(equal == 500 && valid, format!("{equal}/500 matrices equal brute force exactly; matchings one-to-one and consistent: {valid}"))
}

fn unionability() -> Result<Outcome> {
    let spec = SyntheticLakeSpec { seed: 13, n_tables: 20, n_docs: 20, planted_fks: 0, unionable_families: 0, ..Default::default() };
    let lake = generate_synthetic_lake(&spec)?;
    let base = lake.tables.iter().find(|t| t.headers.len() % 2 == 0).expect("even-width table");
    let w = base.headers.len();
    let half = w / 2;
    let projection = SynthTable {
        path: "tables/projection.csv".into(),
        name: "projection".into(),
        headers: base.headers[..half].to_vec(),
        rows: base.rows.iter().map(|r| r[..half].to_vec()).collect(),
    };
    let copy = SynthTable {
        path: "tables/renamed_copy.csv".into(),
        name: "renamed_copy".into(),
        headers: (0..w).map(|i| format!("field_{i}")).collect(),
        rows: base.rows.clone(),
    };
    let cfg = LakeConfig::default();
    let mut b = CorpusBuilder::new(cfg.corpus.clone());
    for t in lake.tables.iter().chain([&projection, &copy]) {
        b.add_table(&t.path, &t.name, &t.to_csv()?)?;
    }
    let mem = MemLake::new(b.finish(Parallelism::default()), cfg)?;
    let ctx = mem.ctx();
    let (t, proj_id, copy_id) = (base.id(), projection.id(), copy.id());
    let hits = ctx.unionable_tables(t, usize::MAX)?;
    let proj_score = ctx.unionability(t, proj_id)?.score;
    let best_unrelated = hits.iter().filter(|h| h.table != proj_id && h.table != copy_id).map(|h| h.score).fold(0.0, f64::max);
    let copy_rank = hits.iter().position(|h| h.table == copy_id).map(|r| r + 1);
    let pass = (proj_score - 0.5).abs() <= 0.1 && proj_score > best_unrelated && copy_rank == Some(1);
    outcome(
        pass,
        format!(
            "{half}/{w}-column projection scores {proj_score:.3}, best unrelated table {best_unrelated:.3}; renamed copy at rank {}",
            copy_rank.map_or("none".into(), |r| r.to_string())
        ),
    )
}

fn metric_identities() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e7);
    let mut identities = 0;
    let mut monotone = true;
    for _ in 0..100 {
        let universe: Vec<DeId> = (0..30).map(|i| id(DeKind::Table, "m", i)).collect();
        let mut ranking = universe.clone();
        ranking.shuffle(&mut rng);
        let n_truth = rng.random_range(1..=10);
        ranking.truncate(rng.random_range(n_truth..=30));
        let truth: BTreeSet<DeId> = universe.choose_multiple(&mut rng, n_truth).copied().collect();
        let rp = r_precision(&ranking, &truth)?;
        let (p, r) = precision_recall_at_k(&ranking, &truth, truth.len())?;
        if rp == p && rp == r {
            identities += 1;
        }
        let mut prev = 0.0;
        for k in 1..=35 {
            let (_, rk) = precision_recall_at_k(&ranking, &truth, k)?;
            monotone &= rk >= prev;
            prev = rk;
        }
    }
    let m = mqcr(&[(7.0, 100.0)])?;
    outcome(
        identities == 100 && m == 0.07 && monotone,
        format!("r_precision == P@|T| == R@|T| on {identities}/100 rankings; mQCR(7/100) = {m}; recall@k non-decreasing: {monotone}"),
    )
}

fn artifact_files(ws: &Workspace) -> Vec<std::path::PathBuf> {
    let mut files = vec![
        ws.config_path(),
        ws.catalog_path(),
        ws.profiles_path(),
        ws.training_set_path(),
        ws.labeling_report_path(),
        ws.model_path(),
        ws.loss_path(),
        ws.joint_index_path(),
        ws.fingerprints_path(),
    ];
    let mut rest: Vec<_> = std::fs::read_dir(ws.ekg_dir()).into_iter().flatten().flatten().map(|e| e.path()).collect();
    rest.extend(std::fs::read_dir(ws.index_dir()).into_iter().flatten().flatten().map(|e| e.path()));
    rest.sort();
    files.extend(rest);
    files
}

fn write_reports(run: &PlantedRun, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (name, r) in [("joint", &run.joint), ("solo", &run.solo)] {
        let p = dir.join(format!("{name}.json"));
        r.write(&p)?;
        out.push(p.clone());
        out.push(p.with_extension("csv"));
    }
    let served = run.engine.run("content_search", serde_json::json!({"value": run.lake.tables[0].name, "k": 10}))?;
    let p = dir.join("served.json");
    std::fs::write(&p, serde_json::to_vec(&served)?)?;
    out.push(p);
    Ok(out)
}

fn determinism(first: &PlantedRun) -> Result<Outcome> {
    let second = planted_run(1, Parallelism::SEQUENTIAL)?;
    let mut files: Vec<(std::path::PathBuf, std::path::PathBuf)> = artifact_files(&Workspace::new(&first.ws_dir))
        .into_iter()
        .zip(artifact_files(&Workspace::new(&second.ws_dir)))
        .collect();
    let ra = write_reports(first, &first.ws_dir.join("reports"))?;
    let rb = write_reports(&second, &second.ws_dir.join("reports"))?;
    files.extend(ra.into_iter().zip(rb));
    let mut differ = Vec::new();
    for (a, b) in &files {
        if a.file_name() != b.file_name() || std::fs::read(a)? != std::fs::read(b)? {
            differ.push(a.file_name().unwrap_or_default().to_string_lossy().to_string());
        }
    }
    let lakes_equal = std::fs::read(first.lake_dir.join("spec.json"))? == std::fs::read(second.lake_dir.join("spec.json"))?;
    outcome(
        differ.is_empty() && lakes_equal,
        format!(
            "{} artifacts and reports compared between a parallel and a sequential run; differing: {}",
            files.len(),
            if differ.is_empty() { "none".to_string() } else { differ.join(", ") }
        ),
    )
}

fn timed(f: impl FnOnce() -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    f()?;
    Ok(start.elapsed().as_secs_f64() * 1e3)
}

fn latency() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let spec = SyntheticLakeSpec {
        seed: 21,
        n_tables: 300,
        n_docs: 7700,
        planted_fks: 40,
        unionable_families: 20,
        ..Default::default()
    };
    let lake = generate_synthetic_lake(&spec)?;
    let cfg = LakeConfig::default();
    let build = Instant::now();
    let engine = build_planted(&lake, &dir.path().join("lake"), &dir.path().join("ws"), &cfg, Parallelism::default())?;
    let build_secs = build.elapsed().as_secs_f64();
    let c = &engine.artifacts.corpus;
    let des = c.tables.len() + c.columns.len() + c.docs.len();

    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |op: &'static str, ms: f64| {
        let w = worst.entry(op).or_insert(0.0);
        *w = w.max(ms);
    };
    for i in 0..20 {
        let doc = &lake.docs[i * 97 % lake.docs.len()];
        let table = &lake.tables[i * 13 % lake.tables.len()];
        let word = doc.text.split_whitespace().nth(3).unwrap_or("report").trim_end_matches('.').to_string();
        let queries = [
            ("content_search", serde_json::json!({"value": word, "mode": "Text", "k": 10})),
            ("content_search", serde_json::json!({"value": word, "mode": "Both", "k": 10})),
            ("catalog_search", serde_json::json!({"value": table.name, "k": 10})),
            ("crossModal_search", serde_json::json!({"value": doc.id(), "topn": 5})),
            ("crossModal_search", serde_json::json!({"value": doc.text, "title": doc.title, "topn": 5})),
            ("pkfk", serde_json::json!({"value": table.id(), "topn": 5})),
            ("unionable", serde_json::json!({"value": table.id(), "topn": 5})),
            ("neighbors", serde_json::json!({"de": table.column_id(&table.headers[0]), "k": 10})),
        ];
        let mut last = None;
        for (op, params) in queries {
            let mut resp = None;
            let ms = timed(|| {
                resp = Some(engine.run(op, params)?);
                Ok(())
            })?;
            note(op, ms);
            if op == "content_search" {
                last = resp.map(|r| r.drs);
            }
        }
        if let Some(a) = last {
            let b = engine.run("catalog_search", serde_json::json!({"value": table.name, "k": 10}))?.drs;
            let params = serde_json::json!({"a": a, "b": b, "op": "union"});
            note("drs_combine", timed(|| engine.run("drs_combine", params).map(|_| ()))?);
        }
    }
    let mut recompute: f64 = 0.0;
    for t in lake.tables.iter().step_by(15) {
        recompute = recompute.max(timed(|| engine.unionable_recompute(t.id()).map(|_| ()))?);
    }
    let max_dp = worst.values().copied().fold(0.0, f64::max);
    let pass = des >= 10_000 && max_dp < 100.0 && recompute < 2000.0;
    let per_op: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1}")).collect();
    outcome(
        pass,
        format!(
            "{des} DEs (built in {build_secs:.0}s); worst ms per DP: {}; unionable recompute worst {recompute:.0} ms",
            per_op.join(", ")
        ),
    )
}

#[allow(clippy::vec_init_then_push)]
fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut results = Vec::new();
    results.push(check("sketch fidelity", sketch_fidelity));
    results.push(check("containment asymmetry", containment_asymmetry));
    results.push(check("triplet loss exactness", eq1_exactness));
    results.push(check("gradient correctness", gradient_correctness));
    results.push(check("label-model sanity", label_model_sanity));
    let mut runs = Vec::new();
    results.push(check("joint >= solo", || joint_vs_solo(&mut runs)));
    results.push(check("hard sampling", || match runs.first() {
        Some(r) => hard_sampling(r),
        None => outcome(false, "planted run unavailable".into()),
    }));
    results.push(check("triplet cardinality", triplet_cardinality));
    results.push(check("pk-fk", pkfk));
    results.push(check("matching oracle", matching_oracle));
    results.push(check("unionability", unionability));
    results.push(check("metric identities", metric_identities));
    results.push(check("determinism", || match runs.first() {
        Some(r) => determinism(r),
        None => outcome(false, "planted run unavailable".into()),
    }));
    drop(runs);
    results.push(check("query latency", latency));
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", results.len());
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
