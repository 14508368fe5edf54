//! Learned adaptation of frozen image embeddings so that cosine similarity
//! tracks visual rather than semantic resemblance.
//!
//! The pipeline is: per-layer pooled descriptors ([`store`]) are compressed
//! with PCA ([`pca`]), mapped through a learned `ReLU(W·d)` adaptation
//! ([`adapter`]) trained with a bidirectional temperature-scaled
//! cross-entropy over the full pair similarity matrix, and scored with
//! Asymmetric Recall ([`eval`]). [`synth`] produces paired datasets with a
//! planted visual subspace for desk-scale experiments.

pub mod adapter;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod pca;
pub mod rng;
pub mod store;
pub mod synth;

pub use adapter::{AdaptationModel, Optimizer, TrainConfig, TrainTrace};
pub use error::{Error, Result};
pub use eval::{asymmetric_recall, rank_pairs, recall_curve, RankResult, TieRule};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport};
pub use pca::PcaModel;
pub use store::{EmbeddingMatrix, PairedDataset, SplitIndices};
pub use synth::SynthConfig;
