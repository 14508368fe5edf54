use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};
use crate::store::{emb1, EmbeddingMatrix};

/// The learnable map `a = ReLU(W·d)`; `W` is `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationModel {
    weights: Array2<f64>,
    init_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub in_dim: usize,
    pub out_dim: usize,
    pub init_seed: u64,
    pub config_hash: String,
}

impl AdaptationModel {
    /// Glorot-style Gaussian init: zero mean, std `sqrt(2 / (in + out))`.
    pub fn init(in_dim: usize, out_dim: usize, seed: u64) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid("adaptation dimensions must be positive"));
        }
        let std = (2.0 / (in_dim + out_dim) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("std is positive");
        let mut rng = rng_for(seed, Stream::Init);
        let weights = Array2::from_shape_simple_fn((out_dim, in_dim), || normal.sample(&mut rng));
        Ok(Self {
            weights,
            init_seed: seed,
        })
    }

    pub fn from_weights(weights: Array2<f64>, init_seed: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("empty weight matrix"));
        }
        if !weights.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        Ok(Self { weights, init_seed })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }

    /// Row `i` of the output is `max(0, W·d_i)`.
    pub fn forward(&self, d: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if d.n_cols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                actual: d.n_cols(),
            });
        }
        EmbeddingMatrix::new(d.view().dot(&self.weights.t()).mapv_into(|v| v.max(0.0)))
    }

    /// Writes `<stem>.emb` (the weights) and `<stem>.json`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str, config_hash: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        emb1::save(
            &EmbeddingMatrix::new(self.weights.clone())?,
            dir.join(format!("{stem}.emb")),
        )?;
        let meta = CheckpointMeta {
            in_dim: self.in_dim(),
            out_dim: self.out_dim(),
            init_seed: self.init_seed,
            config_hash: config_hash.to_owned(),
        };
        let path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<(Self, CheckpointMeta)> {
        let dir = dir.as_ref();
        let weights = emb1::load(dir.join(format!("{stem}.emb")))?;
        let path = dir.join(format!("{stem}.json"));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: CheckpointMeta =
            serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
        if weights.n_rows() != meta.out_dim || weights.n_cols() != meta.in_dim {
            return Err(Error::invalid(format!(
                "checkpoint is {}x{} but metadata says {}x{}",
                weights.n_rows(),
                weights.n_cols(),
                meta.out_dim,
                meta.in_dim
            )));
        }
        Ok((
            Self::from_weights(weights.into_inner(), meta.init_seed)?,
            meta,
        ))
    }
}
