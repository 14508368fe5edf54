//! PCA used to compress concatenated descriptors before adaptation.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{emb1, EmbeddingMatrix};

/// Above this input dimension the basis is taken from the `n × n` Gram
/// matrix of the centered data (an SVD of the data) instead of the `d × d`
/// covariance, whenever `n < d`.
pub const COVARIANCE_SOLVER_MAX_DIM: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Array1<f64>,
    /// `k × d`, orthonormal rows, descending variance.
    components: Array2<f64>,
    explained_variance: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    input_dim: usize,
    n_components: usize,
    explained_variance: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    /// Fits the top-`k` principal components, using the sample covariance
    /// (divisor `n - 1`). Each component's largest-magnitude coordinate is
    /// made positive.
    pub fn fit(data: &EmbeddingMatrix, k: usize) -> Result<Self> {
        let (n, d) = (data.n_rows(), data.n_cols());
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two rows"));
        }
        if k == 0 || k > (n - 1).min(d) {
            return Err(Error::invalid(format!(
                "cannot keep {k} components from {n} rows of dimension {d} (max {})",
                (n - 1).min(d)
            )));
        }
        let x = data.view();
        let mean = x.mean_axis(Axis(0)).expect("n >= 2");
        let centered = &x - &mean;

        let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
        let floor = d as f64 * (16.0 * f64::EPSILON * scale).powi(2);
        if !(total_variance > floor) {
            return Err(Error::ZeroVariance);
        }

        let (values, components) = if d <= COVARIANCE_SOLVER_MAX_DIM || d <= n {
            covariance_eigen(centered.view(), k)
        } else {
            gram_eigen(centered.view(), k)
        };
        let mut components = components;
        for mut row in components.rows_mut() {
            let pivot =
                row.iter().copied().fold(
                    0.0_f64,
                    |best, v| if v.abs() > best.abs() { v } else { best },
                );
            if pivot < 0.0 {
                row.mapv_inplace(|v| -v);
            }
        }
        let explained_variance: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let explained_variance_ratio = explained_variance
            .iter()
            .map(|v| (v / total_variance).min(1.0))
            .collect();
        Ok(Self {
            mean,
            components,
            explained_variance,
            explained_variance_ratio,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn components(&self) -> &Array2<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    /// Fraction of total variance kept by the retained components.
    pub fn variance_sum(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }

    /// Row `i` of the result is `components · (row_i - mean)`.
    pub fn transform(&self, data: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if data.n_cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: data.n_cols(),
            });
        }
        let centered = &data.view() - &self.mean;
        EmbeddingMatrix::new(centered.dot(&self.components.t()))
    }

    /// Maps reduced coordinates back to the input space.
    pub fn inverse_transform(&self, reduced: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if reduced.n_cols() != self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                actual: reduced.n_cols(),
            });
        }
        EmbeddingMatrix::new(reduced.view().dot(&self.components) + &self.mean)
    }

    /// Writes `pca_mean.emb`, `pca_components.emb` and `pca.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mean = self.mean.clone().insert_axis(Axis(0));
        emb1::save(&EmbeddingMatrix::new(mean)?, dir.join("pca_mean.emb"))?;
        emb1::save(
            &EmbeddingMatrix::new(self.components.clone())?,
            dir.join("pca_components.emb"),
        )?;
        let sidecar = Sidecar {
            input_dim: self.input_dim(),
            n_components: self.n_components(),
            explained_variance: self.explained_variance.clone(),
            explained_variance_ratio: self.explained_variance_ratio.clone(),
        };
        let path = dir.join("pca.json");
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mean = emb1::load(dir.join("pca_mean.emb"))?;
        let components = emb1::load(dir.join("pca_components.emb"))?;
        let path = dir.join("pca.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let sidecar: Sidecar =
            serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
        if mean.n_rows() != 1
            || mean.n_cols() != sidecar.input_dim
            || components.n_cols() != sidecar.input_dim
            || components.n_rows() != sidecar.n_components
            || sidecar.explained_variance.len() != sidecar.n_components
            || sidecar.explained_variance_ratio.len() != sidecar.n_components
        {
            return Err(Error::invalid(format!(
                "{}: inconsistent PCA files",
                dir.display()
            )));
        }
        Ok(Self {
            mean: mean.into_inner().remove_axis(Axis(0)),
            components: components.into_inner(),
            explained_variance: sidecar.explained_variance,
            explained_variance_ratio: sidecar.explained_variance_ratio,
        })
    }
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

/// Eigenpairs of a symmetric matrix, largest `k` first.
fn top_eigen(sym: &Array2<f64>, k: usize) -> (Vec<f64>, Vec<nalgebra::DVector<f64>>) {
    let eig = SymmetricEigen::new(to_nalgebra(sym));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(k);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

fn covariance_eigen(centered: ArrayView2<'_, f64>, k: usize) -> (Vec<f64>, Array2<f64>) {
    let n = centered.nrows();
    let d = centered.ncols();
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
    // Exact symmetry for the solver.
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    let (values, vectors) = top_eigen(&cov, k);
    let components = Array2::from_shape_fn((k, d), |(r, c)| vectors[r][c]);
    (values, components)
}

fn gram_eigen(centered: ArrayView2<'_, f64>, k: usize) -> (Vec<f64>, Array2<f64>) {
    let n = centered.nrows();
    let d = centered.ncols();
    let gram = centered.dot(&centered.t()) / (n - 1) as f64;
    let (values, vectors) = top_eigen(&gram, k);
    let mut components = Array2::zeros((k, d));
    for (r, (value, u)) in values.iter().zip(&vectors).enumerate() {
        let u = Array1::from_iter(u.iter().copied());
        let mut v = centered.t().dot(&u);
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 && *value > 0.0 {
            v /= norm;
        }
        components.row_mut(r).assign(&v);
    }
    (values, components)
}
