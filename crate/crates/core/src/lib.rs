//! Workbench for multitask conversational movie recommendation.
//!
//! The crate covers the offline side of the pipeline: parsing the raw
//! ReDial / MovieLens / review datasets, building the four text-to-text
//! training corpora, computing co-occurrence and PMI² statistics, generating
//! probe suites, and scoring any sequence scorer on them.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod chat;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod jsonl;
pub mod par;
pub mod probes;
pub mod scoring;
pub mod stats;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
pub use par::Execution;
