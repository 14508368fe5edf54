//! Embedding data model, descriptor preprocessing, the EMB1 file format and
//! pair-preserving splits.

mod dataset;
pub mod emb1;
mod features;
mod matrix;

pub use dataset::{split_pairs, DatasetManifest, PairedDataset, SplitIndices};
pub use emb1::{load, save};
pub use features::{
    concat_layers, describe, l2_normalize, pool_spatial, FeatureMap, FeatureMapStack,
};
pub use matrix::EmbeddingMatrix;
