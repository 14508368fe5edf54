use ndarray::ArrayView2;
use rand::seq::index::sample;

use super::model::AdaptationModel;
use super::train::loss_and_gradient;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};
use crate::store::PairedDataset;

pub const FD_STEP: f64 = 1e-5;
pub const MIN_ENTRIES: usize = 200;
/// Denominator floor so gradients at round-off level do not blow up the
/// relative error.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries whose ±step perturbation flips a ReLU, where the loss is not
    /// differentiable and finite differences are meaningless.
    pub skipped_kinks: usize,
    /// All activations were zero, so the analytic gradient is zero.
    pub flat: bool,
}

/// Compares the analytic `∂L/∂W` with central finite differences on a
/// random subset of at least [`MIN_ENTRIES`] weights (all of them when `W`
/// is smaller). Meant for small samples in `f64`.
pub fn gradient_check(
    model: &AdaptationModel,
    sample_set: &PairedDataset,
    sigma: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let w = model.weights();
    let left = sample_set.left().view();
    let right = sample_set.right().view();
    let step = loss_and_gradient(w.view(), left, right, sigma)?;

    let pre_l = left.dot(&w.t());
    let pre_r = right.dot(&w.t());
    if pre_l.iter().chain(pre_r.iter()).all(|&z| z <= 0.0) {
        if step.grad.iter().any(|&g| g != 0.0) {
            return Err(Error::invalid("dead model produced a non-zero gradient"));
        }
        return Ok(GradCheckReport {
            max_rel_error: 0.0,
            checked: 0,
            skipped_kinks: 0,
            flat: true,
        });
    }

    let (out_dim, in_dim) = w.dim();
    let total = out_dim * in_dim;
    let entries: Vec<usize> = if total <= MIN_ENTRIES {
        (0..total).collect()
    } else {
        sample(&mut rng_for(seed, Stream::GradCheck), total, MIN_ENTRIES).into_vec()
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        flat: false,
    };
    let mut probe = w.clone();
    for flat_index in entries {
        let (o, i) = (flat_index / in_dim, flat_index % in_dim);
        if crosses_kink(pre_l.view(), left, o, i) || crosses_kink(pre_r.view(), right, o, i) {
            report.skipped_kinks += 1;
            continue;
        }
        let orig = probe[[o, i]];
        probe[[o, i]] = orig + FD_STEP;
        let up = loss_and_gradient(probe.view(), left, right, sigma)?.loss;
        probe[[o, i]] = orig - FD_STEP;
        let down = loss_and_gradient(probe.view(), left, right, sigma)?.loss;
        probe[[o, i]] = orig;

        let numeric = (up - down) / (2.0 * FD_STEP);
        let analytic = step.grad[[o, i]];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(REL_FLOOR);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

/// Whether moving `W[o][i]` by ±step changes the sign of any
/// pre-activation of unit `o`.
fn crosses_kink(pre: ArrayView2<'_, f64>, inputs: ArrayView2<'_, f64>, o: usize, i: usize) -> bool {
    pre.column(o).iter().zip(inputs.column(i)).any(|(&z, &x)| {
        let delta = FD_STEP * x.abs();
        z.abs() <= delta
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::EmbeddingMatrix;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn sample_set(n: usize, d: usize, seed: u64) -> PairedDataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = || {
            EmbeddingMatrix::new(Array2::from_shape_simple_fn((n, d), || {
                rng.gen_range(-1.0..1.0)
            }))
            .unwrap()
        };
        let l = m();
        let r = m();
        PairedDataset::with_default_ids(l, r).unwrap()
    }

    #[test]
    fn random_instances_pass() {
        for seed in 0..3 {
            for sigma in [1.0, 15.0] {
                let ds = sample_set(6, 10, seed);
                let model = AdaptationModel::init(10, 14, seed + 100).unwrap();
                let r = gradient_check(&model, &ds, sigma, seed).unwrap();
                assert!(r.checked > 100, "{r:?}");
                assert!(r.max_rel_error < 1e-4, "seed {seed} sigma {sigma}: {r:?}");
            }
        }
    }

    #[test]
    fn zero_weights_are_flat() {
        let ds = sample_set(4, 3, 0);
        let model = AdaptationModel::from_weights(Array2::zeros((5, 3)), 0).unwrap();
        let r = gradient_check(&model, &ds, 1.0, 0).unwrap();
        assert!(r.flat);
        assert_eq!(r.checked, 0);
        assert_eq!(r.max_rel_error, 0.0);
    }

    fn diagonal_model(values: &[f64]) -> AdaptationModel {
        AdaptationModel::from_weights(Array2::from_diag(&ndarray::arr1(values)), 0).unwrap()
    }

    #[test]
    fn identity_model_checks_every_entry() {
        let ds = sample_set(5, 4, 9);
        let r = gradient_check(&diagonal_model(&[1.0, 0.5, 2.0, 1.5]), &ds, 15.0, 0).unwrap();
        assert_eq!(r.checked + r.skipped_kinks, 16);
        assert!(r.max_rel_error < 1e-4);
    }
}
