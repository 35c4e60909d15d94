//! Metrics, ground truth, a seeded lake generator and the benchmark runner.

pub mod bench;
pub mod metrics;
pub mod synth;
pub mod truth;

pub use bench::{build_planted, compute_mqcr, gold_from_truth, rank, run_benchmark, BenchSystem, BenchmarkReport};
pub use metrics::{median, mqcr, precision_recall_at_k, r_precision, relative_recall, MeasureRecall};
pub use synth::{generate_synthetic_lake, SynthDoc, SynthTable, SyntheticLake, SyntheticLakeSpec};
pub use truth::{GroundTruth, Task};
