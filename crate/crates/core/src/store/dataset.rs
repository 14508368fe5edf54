use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{emb1, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

/// Aligned left/right descriptors; row `i` of each side is ground-truth pair `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    left: EmbeddingMatrix,
    right: EmbeddingMatrix,
    pair_ids: Vec<String>,
}

impl PairedDataset {
    pub fn new(
        left: EmbeddingMatrix,
        right: EmbeddingMatrix,
        pair_ids: Vec<String>,
    ) -> Result<Self> {
        if left.n_rows() != right.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: left.n_rows(),
                actual: right.n_rows(),
            });
        }
        if left.n_cols() != right.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: left.n_cols(),
                actual: right.n_cols(),
            });
        }
        if pair_ids.len() != left.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: left.n_rows(),
                actual: pair_ids.len(),
            });
        }
        let mut seen = HashSet::with_capacity(pair_ids.len());
        if let Some(dup) = pair_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("duplicate pair id {dup:?}")));
        }
        Ok(Self {
            left,
            right,
            pair_ids,
        })
    }

    /// Pair ids `pair_00000`, `pair_00001`, ...
    pub fn with_default_ids(left: EmbeddingMatrix, right: EmbeddingMatrix) -> Result<Self> {
        let ids = (0..left.n_rows()).map(|i| format!("pair_{i:05}")).collect();
        Self::new(left, right, ids)
    }

    pub fn left(&self) -> &EmbeddingMatrix {
        &self.left
    }

    pub fn right(&self) -> &EmbeddingMatrix {
        &self.right
    }

    pub fn pair_ids(&self) -> &[String] {
        &self.pair_ids
    }

    pub fn len(&self) -> usize {
        self.pair_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.left.n_cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            left: self.left.select_rows(indices)?,
            right: self.right.select_rows(indices)?,
            pair_ids: indices.iter().map(|&i| self.pair_ids[i].clone()).collect(),
        })
    }

    /// The same pairs with the sides exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
            pair_ids: self.pair_ids.clone(),
        }
    }

    /// Writes `left.emb`, `right.emb` and `manifest.json` into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        emb1::save(&self.left, dir.join("left.emb"))?;
        emb1::save(&self.right, dir.join("right.emb"))?;
        let manifest = DatasetManifest {
            left: "left.emb".into(),
            right: "right.emb".into(),
            pair_ids: self.pair_ids.clone(),
        };
        let path = dir.join("manifest.json");
        manifest.save(&path)?;
        Ok(path)
    }

    /// Loads a dataset from its manifest. Relative paths in the manifest
    /// resolve against the manifest's directory.
    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest = DatasetManifest::load(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let left = emb1::load(base.join(&manifest.left))?;
        let right = emb1::load(base.join(&manifest.right))?;
        Self::new(left, right, manifest.pair_ids)
    }
}

/// `{"left": <path>, "right": <path>, "pair_ids": [...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub left: PathBuf,
    pub right: PathBuf,
    pub pair_ids: Vec<String>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded random partition of the pairs; `|train| = floor(fraction * n)`.
pub fn split_pairs(n_pairs: usize, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * n_pairs as f64).floor() as usize;
    if n_train == 0 || n_train >= n_pairs {
        return Err(Error::invalid(format!(
            "fraction {train_fraction} of {n_pairs} pairs leaves an empty train or test side"
        )));
    }
    let mut order: Vec<usize> = (0..n_pairs).collect();
    order.shuffle(&mut rng_for(seed, Stream::Split));
    let test = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        test,
        seed,
    })
}
