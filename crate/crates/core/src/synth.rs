//! Paired datasets with a planted shared "visual" subspace hidden under
//! stronger, side-independent "semantic" distractors.
//!
//! For pair `i`:
//!
//! ```text
//! left_i  = M·z_i + ρ·N_L·u_i^L + ε
//! right_i = M·z_i + ρ·N_R·u_i^R + ε
//! ```
//!
//! `z_i ~ N(0, I/v)` is shared by both sides, `u ~ N(0, I/s)` is drawn
//! independently per side, so each latent block carries unit expected
//! energy and `ρ²` is the semantic-to-visual energy ratio. `M` (`D × v`),
//! `N_L` and `N_R` (`D × s`) have orthonormal columns and both `N`s lie in
//! the orthogonal complement of `M`. Rows are L2-normalized at the end.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};
use crate::store::{EmbeddingMatrix, PairedDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_pairs: usize,
    pub visual_dim: usize,
    pub semantic_dim: usize,
    pub ambient_dim: usize,
    /// Amplitude of the semantic block relative to the visual one.
    pub semantic_strength: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_pairs: 2000,
            visual_dim: 16,
            semantic_dim: 64,
            ambient_dim: 256,
            semantic_strength: 4.0,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0
            || self.visual_dim == 0
            || self.semantic_dim == 0
            || self.ambient_dim == 0
        {
            return Err(Error::invalid(
                "all synthetic dimensions must be at least 1",
            ));
        }
        if self.visual_dim + self.semantic_dim > self.ambient_dim {
            return Err(Error::invalid(format!(
                "visual ({}) + semantic ({}) dimensions exceed ambient dimension {}",
                self.visual_dim, self.semantic_dim, self.ambient_dim
            )));
        }
        if !(self.semantic_strength >= 0.0 && self.semantic_strength.is_finite()) {
            return Err(Error::invalid("semantic strength must be non-negative"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise std must be non-negative"));
        }
        Ok(())
    }
}

/// A generated dataset together with the planted bases.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: PairedDataset,
    /// `M`, `D × v`.
    pub visual_basis: Array2<f64>,
    pub left_semantic_basis: Array2<f64>,
    pub right_semantic_basis: Array2<f64>,
}

impl SyntheticData {
    /// Coordinates of every row in the visual subspace (`Mᵀx`). Retrieval
    /// on these is the best a linear map can hope for.
    pub fn visual_projection(&self) -> Result<PairedDataset> {
        let project = |m: &EmbeddingMatrix| EmbeddingMatrix::new(m.view().dot(&self.visual_basis));
        PairedDataset::new(
            project(self.dataset.left())?,
            project(self.dataset.right())?,
            self.dataset.pair_ids().to_vec(),
        )
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<PairedDataset> {
    Ok(generate_with_bases(cfg)?.dataset)
}

pub fn generate_with_bases(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, Stream::Synth);
    let d = cfg.ambient_dim;
    let visual = orthonormal_columns(&mut rng, d, cfg.visual_dim, None);
    let sem_l = orthonormal_columns(&mut rng, d, cfg.semantic_dim, Some(&visual));
    let sem_r = orthonormal_columns(&mut rng, d, cfg.semantic_dim, Some(&visual));

    let n = cfg.n_pairs;
    let z = gaussian(
        &mut rng,
        n,
        cfg.visual_dim,
        1.0 / (cfg.visual_dim as f64).sqrt(),
    );
    let u_l = gaussian(
        &mut rng,
        n,
        cfg.semantic_dim,
        1.0 / (cfg.semantic_dim as f64).sqrt(),
    );
    let u_r = gaussian(
        &mut rng,
        n,
        cfg.semantic_dim,
        1.0 / (cfg.semantic_dim as f64).sqrt(),
    );
    let e_l = gaussian(&mut rng, n, d, cfg.noise_std);
    let e_r = gaussian(&mut rng, n, d, cfg.noise_std);

    let shared = z.dot(&visual.t());
    let rho = cfg.semantic_strength;
    let left = &shared + &(u_l.dot(&sem_l.t()) * rho) + &e_l;
    let right = shared + &(u_r.dot(&sem_r.t()) * rho) + &e_r;

    let dataset = PairedDataset::with_default_ids(normalize_rows(left)?, normalize_rows(right)?)?;
    Ok(SyntheticData {
        dataset,
        visual_basis: visual,
        left_semantic_basis: sem_l,
        right_semantic_basis: sem_r,
    })
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || std * rng.sample::<f64, _>(StandardNormal))
}

/// `count` random orthonormal columns in `R^dim`, orthogonal to the columns
/// of `against` when given. Gram-Schmidt with one re-orthogonalization pass.
fn orthonormal_columns(
    rng: &mut ChaCha8Rng,
    dim: usize,
    count: usize,
    against: Option<&Array2<f64>>,
) -> Array2<f64> {
    let mut basis: Vec<ndarray::Array1<f64>> = Vec::with_capacity(count);
    let fixed: Vec<ndarray::Array1<f64>> = against
        .map(|a| a.axis_iter(Axis(1)).map(|c| c.to_owned()).collect())
        .unwrap_or_default();
    while basis.len() < count {
        let mut v = gaussian(rng, 1, dim, 1.0).remove_axis(Axis(0));
        for _ in 0..2 {
            for b in fixed.iter().chain(&basis) {
                let p = v.dot(b);
                v.scaled_add(-p, b);
            }
        }
        let norm = v.dot(&v).sqrt();
        // A draw that collapses is redrawn; with dim >= v + s this is
        // vanishingly rare.
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    let mut out = Array2::zeros((dim, count));
    for (j, b) in basis.iter().enumerate() {
        out.column_mut(j).assign(b);
    }
    out
}

fn normalize_rows(mut m: Array2<f64>) -> Result<EmbeddingMatrix> {
    for mut row in m.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        row /= norm;
    }
    EmbeddingMatrix::new(m)
}
