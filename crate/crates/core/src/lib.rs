//! Core algorithms for classifying personal facts extracted from dialogue.
//!
//! Everything in this crate is `no_std` and only needs an allocator: the
//! seven-dimension label taxonomy and its canonicalization rules, seeded
//! stratified splitting, K-Means diversity sampling, the multi-head
//! classifier trained on frozen embeddings, F1 reporting, inter-annotator
//! agreement statistics, the TF-IDF + logistic regression baseline and
//! corpus-level distribution analysis.
//!
//! File formats, the HTTP embedding client and the command line live in the
//! companion `factkit` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod agreement;
pub mod baseline;
pub mod distribution;
pub mod embedding;
pub mod kmeans;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod split;
pub mod stats;
pub mod taxonomy;

pub use embedding::EmbeddingMatrix;
pub use model::{MultiHeadModel, TargetVector, TrainConfig};
pub use rng::XorShift64Star;
pub use taxonomy::{Dimension, FactRecord, LabelSet, RawAnnotation, Source};
