//! Sequential against data-parallel execution of the per-DE stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lakelens_core::ekg::{materialize_ekg, NameIndex, RelationContext};
use lakelens_core::eval::{generate_synthetic_lake, SyntheticLakeSpec};
use lakelens_core::indexes::IndexSet;
use lakelens_core::profiler::profile_corpus;
use lakelens_core::{LakeConfig, Parallelism};

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::SEQUENTIAL), ("parallel", Parallelism(0))];

fn stages(c: &mut Criterion) {
    let spec = SyntheticLakeSpec { n_tables: 30, n_docs: 300, ..Default::default() };
    let lake = generate_synthetic_lake(&spec).expect("lake");
    let cfg = LakeConfig::default();
    let corpus = lake.corpus(&cfg.corpus, Parallelism::SEQUENTIAL).expect("corpus");
    let store = profile_corpus(&corpus, &cfg.profile, Parallelism::SEQUENTIAL).expect("profiles");
    let indexes = IndexSet::build(&corpus, &store, &cfg.index).expect("indexes");
    let names = NameIndex::build(&corpus);
    let ctx = RelationContext { corpus: &corpus, store: &store, indexes: &indexes, names: &names, cfg: &cfg.ekg };

    let mut g = c.benchmark_group("profile");
    g.sample_size(10);
    for (name, par) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| {
            b.iter(|| black_box(profile_corpus(&corpus, &cfg.profile, par).expect("profiles")))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("ekg");
    g.sample_size(10);
    for (name, par) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| b.iter(|| black_box(materialize_ekg(&ctx, par))));
    }
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
