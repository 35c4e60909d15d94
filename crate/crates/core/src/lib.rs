//! Cross-modal discovery over a lake of CSV tables and text documents.
//!
//! The pipeline runs corpus ingestion, profiling, indexing, weak labeling,
//! joint-representation training and graph materialization; [`query`] answers
//! discovery primitives over the resulting artifacts.

pub mod config;
pub mod corpus;
pub mod ekg;
pub mod error;
pub mod eval;
pub mod ids;
pub mod indexes;
pub mod jointrep;
pub mod par;
pub mod pipeline;
pub mod profiler;
pub mod query;
pub mod text;
pub mod weaklabel;

pub use config::LakeConfig;
pub use error::{Error, Result};
pub use ids::{DeId, DeKind};
pub use par::Parallelism;
