use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::loss::loss;
use super::model::AdaptationModel;
use super::similarity::normalize_rows;
use crate::error::{Error, Result};
use crate::eval::{asymmetric_recall, rank_from_similarity, TieRule};
use crate::store::PairedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

/// Which intermediate weights the trace keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointPolicy {
    #[default]
    FinalOnly,
    Every(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Temperature multiplying similarities before the softmax.
    pub sigma: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Rank cutoffs evaluated on the held-out pairs after every epoch.
    pub eval_ks: Vec<usize>,
    pub checkpoint: CheckpointPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sigma: 15.0,
            epochs: 150,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            seed: 0,
            eval_ks: vec![1, 5, 10, 20, 50],
            checkpoint: CheckpointPolicy::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {}",
                self.sigma
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
                return Err(Error::invalid("invalid Adam parameters"));
            }
        }
        if self.checkpoint == CheckpointPolicy::Every(0) {
            return Err(Error::invalid("checkpoint interval must be positive"));
        }
        crate::eval::rank::validate_ks(&self.eval_ks)?;
        if self.eval_ks[0] != 1 {
            return Err(Error::invalid("rank cutoffs must include 1"));
        }
        Ok(())
    }
}

/// State after `epoch` parameter updates (epoch 0 is the initialization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training loss of the full training set.
    pub loss: f64,
    pub train_ar1: f64,
    pub test_ar1: Option<f64>,
    /// Test aR at each of the trace's `ks`; empty without a test set.
    pub test_recall: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub ks: Vec<usize>,
    pub records: Vec<EpochRecord>,
    pub snapshots: Vec<(usize, AdaptationModel)>,
}

impl TrainTrace {
    /// `epoch,loss,train_ar1,test_ar1`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_ar1,test_ar1\n");
        for r in &self.records {
            let test = r.test_ar1.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch, r.loss, r.train_ar1, test
            ));
        }
        out
    }

    /// `epoch,k1,k5,...` with one test aR column per cutoff.
    pub fn test_curve_csv(&self) -> String {
        let mut out = String::from("epoch");
        for k in &self.ks {
            out.push_str(&format!(",k{k}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.epoch.to_string());
            for v in &r.test_recall {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Loss, similarity matrix and `∂loss/∂W` for one full-batch pass.
#[derive(Debug, Clone)]
pub struct Step {
    pub loss: f64,
    pub similarity: Array2<f64>,
    pub grad: Array2<f64>,
}

struct Side {
    pre: Array2<f64>,
    norms: Array1<f64>,
    unit: Array2<f64>,
}

fn forward_side(weights: ArrayView2<'_, f64>, d: ArrayView2<'_, f64>) -> Side {
    let pre = d.dot(&weights.t());
    let act = pre.mapv(|v| v.max(0.0));
    let (norms, unit) = normalize_rows(act.view());
    Side { pre, norms, unit }
}

/// Back through row normalization and the ReLU: turns `∂L/∂unit` into
/// `∂L/∂pre`. Rows with zero norm (and inactive units) pass no gradient.
fn backward_side(side: &Side, mut grad_unit: Array2<f64>) -> Array2<f64> {
    let radial = (&side.unit * &grad_unit).sum_axis(Axis(1));
    for (i, mut g) in grad_unit.rows_mut().into_iter().enumerate() {
        let n = side.norms[i];
        if n > 0.0 {
            let r = radial[i];
            Zip::from(&mut g)
                .and(side.unit.row(i))
                .for_each(|g, &u| *g = (*g - u * r) / n);
        } else {
            g.fill(0.0);
        }
    }
    Zip::from(&mut grad_unit).and(&side.pre).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    grad_unit
}

pub fn loss_and_gradient(
    weights: ArrayView2<'_, f64>,
    left: ArrayView2<'_, f64>,
    right: ArrayView2<'_, f64>,
    sigma: f64,
) -> Result<Step> {
    if left.dim() != right.dim() {
        return Err(Error::invalid(format!(
            "left {:?} and right {:?} differ in shape",
            left.dim(),
            right.dim()
        )));
    }
    if left.ncols() != weights.ncols() {
        return Err(Error::DimensionMismatch {
            expected: weights.ncols(),
            actual: left.ncols(),
        });
    }
    let l = forward_side(weights, left);
    let r = forward_side(weights, right);
    let similarity = l.unit.dot(&r.unit.t());
    let out = loss(similarity.view(), sigma)?;
    let grad_l = backward_side(&l, out.grad.dot(&r.unit));
    let grad_r = backward_side(&r, out.grad.t().dot(&l.unit));
    let grad = grad_l.t().dot(&left) + grad_r.t().dot(&right);
    Ok(Step {
        loss: out.loss,
        similarity,
        grad,
    })
}

fn similarity_only(weights: ArrayView2<'_, f64>, ds: &PairedDataset) -> Array2<f64> {
    let l = forward_side(weights, ds.left().view());
    let r = forward_side(weights, ds.right().view());
    l.unit.dot(&r.unit.t())
}

fn ar1(similarity: &Array2<f64>) -> f64 {
    asymmetric_recall(
        &rank_from_similarity(similarity.view(), TieRule::Optimistic),
        1,
    )
}

fn test_recall(weights: ArrayView2<'_, f64>, test: &PairedDataset, ks: &[usize]) -> Vec<f64> {
    let ranks = rank_from_similarity(similarity_only(weights, test).view(), TieRule::Optimistic);
    ks.iter().map(|&k| asymmetric_recall(&ranks, k)).collect()
}

enum OptState {
    Sgd,
    Adam {
        m: Array2<f64>,
        v: Array2<f64>,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        t: i32,
    },
}

impl OptState {
    fn new(opt: Optimizer, shape: (usize, usize)) -> Self {
        match opt {
            Optimizer::Sgd => OptState::Sgd,
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => OptState::Adam {
                m: Array2::zeros(shape),
                v: Array2::zeros(shape),
                beta1,
                beta2,
                epsilon,
                t: 0,
            },
        }
    }

    fn apply(&mut self, weights: &mut Array2<f64>, grad: &Array2<f64>, lr: f64) {
        match self {
            OptState::Sgd => weights.scaled_add(-lr, grad),
            OptState::Adam {
                m,
                v,
                beta1,
                beta2,
                epsilon,
                t,
            } => {
                *t += 1;
                let (b1, b2, eps) = (*beta1, *beta2, *epsilon);
                let c1 = 1.0 - b1.powi(*t);
                let c2 = 1.0 - b2.powi(*t);
                Zip::from(weights)
                    .and(m)
                    .and(v)
                    .and(grad)
                    .for_each(|w, m, v, &g| {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    });
            }
        }
    }
}

/// Full-batch training for `cfg.epochs` updates.
///
/// The trace holds `epochs + 1` records: the initialization and the state
/// after each update. When `test` is given its aR at `cfg.eval_ks` is
/// recorded for every one of them.
pub fn train(
    train_set: &PairedDataset,
    test: Option<&PairedDataset>,
    cfg: &TrainConfig,
    model: AdaptationModel,
) -> Result<(AdaptationModel, TrainTrace)> {
    cfg.validate()?;
    if train_set.dim() != model.in_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.in_dim(),
            actual: train_set.dim(),
        });
    }
    if let Some(t) = test {
        if t.dim() != model.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.in_dim(),
                actual: t.dim(),
            });
        }
    }
    let mut model = model;
    let mut opt = OptState::new(cfg.optimizer, model.weights().dim());
    let mut trace = TrainTrace {
        ks: cfg.eval_ks.clone(),
        ..Default::default()
    };
    let diverged = |epoch: usize, loss: f64| Error::Divergence { epoch, loss };
    let record =
        |epoch: usize, loss: f64, similarity: &Array2<f64>, weights: ArrayView2<'_, f64>| {
            let test_recall = test
                .map(|t| test_recall(weights, t, &cfg.eval_ks))
                .unwrap_or_default();
            EpochRecord {
                epoch,
                loss,
                train_ar1: ar1(similarity),
                test_ar1: test_recall.first().copied(),
                test_recall,
            }
        };

    for epoch in 0..cfg.epochs {
        let step = loss_and_gradient(
            model.weights().view(),
            train_set.left().view(),
            train_set.right().view(),
            cfg.sigma,
        )
        .map_err(|e| match e {
            Error::NonFinite(_) => diverged(epoch, f64::NAN),
            other => other,
        })?;
        if !step.loss.is_finite() {
            return Err(diverged(epoch, step.loss));
        }
        trace.records.push(record(
            epoch,
            step.loss,
            &step.similarity,
            model.weights().view(),
        ));
        opt.apply(model.weights_mut(), &step.grad, cfg.learning_rate);
        if !model.weights().iter().all(|v| v.is_finite()) {
            return Err(diverged(epoch + 1, f64::NAN));
        }
        if let CheckpointPolicy::Every(n) = cfg.checkpoint {
            if (epoch + 1) % n == 0 && epoch + 1 < cfg.epochs {
                trace.snapshots.push((epoch + 1, model.clone()));
            }
        }
    }

    let similarity = similarity_only(model.weights().view(), train_set);
    let final_loss = loss(similarity.view(), cfg.sigma)
        .map_err(|_| diverged(cfg.epochs, f64::NAN))?
        .loss;
    if !final_loss.is_finite() {
        return Err(diverged(cfg.epochs, final_loss));
    }
    trace.records.push(record(
        cfg.epochs,
        final_loss,
        &similarity,
        model.weights().view(),
    ));
    trace.snapshots.push((cfg.epochs, model.clone()));
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::EmbeddingMatrix;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn random_pairs(n: usize, d: usize, seed: u64) -> PairedDataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let base = Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..1.0));
        let noise = Array2::from_shape_simple_fn((n, d), || rng.gen_range(-0.8..0.8));
        let left = EmbeddingMatrix::new(&base + &noise).unwrap();
        let right = EmbeddingMatrix::new(base - noise).unwrap();
        PairedDataset::with_default_ids(left, right).unwrap()
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            learning_rate: 1e-2,
            eval_ks: vec![1, 3],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases_and_trace_shape() {
        let ds = random_pairs(40, 8, 1);
        let test = random_pairs(10, 8, 2);
        let model = AdaptationModel::init(8, 32, 3).unwrap();
        let (_, trace) = train(&ds, Some(&test), &small_cfg(30), model).unwrap();
        assert_eq!(trace.records.len(), 31);
        assert_eq!(trace.records.last().unwrap().epoch, 30);
        assert!(trace.records.last().unwrap().loss < trace.records[0].loss);
        assert!(trace
            .records
            .iter()
            .all(|r| r.loss.is_finite() && r.loss >= 0.0));
        assert!(trace.records.iter().all(|r| r.test_recall.len() == 2));
        assert_eq!(trace.snapshots.len(), 1);
    }

    #[test]
    fn sgd_also_descends() {
        let ds = random_pairs(30, 6, 4);
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 0.5,
            ..small_cfg(20)
        };
        let (_, trace) = train(&ds, None, &cfg, AdaptationModel::init(6, 16, 0).unwrap()).unwrap();
        assert!(trace.records.last().unwrap().loss < trace.records[0].loss);
        assert!(trace.records[0].test_ar1.is_none());
    }

    #[test]
    fn deterministic() {
        let ds = random_pairs(25, 5, 7);
        let test = random_pairs(8, 5, 8);
        let run = || {
            let m = AdaptationModel::init(5, 12, 11).unwrap();
            train(&ds, Some(&test), &small_cfg(10), m).unwrap()
        };
        let (m1, t1) = run();
        let (m2, t2) = run();
        assert_eq!(m1, m2);
        assert_eq!(t1, t2);
        assert_eq!(t1.to_csv(), t2.to_csv());
    }

    #[test]
    fn checkpoints_every_n() {
        let ds = random_pairs(10, 4, 0);
        let cfg = TrainConfig {
            checkpoint: CheckpointPolicy::Every(3),
            ..small_cfg(10)
        };
        let (_, trace) = train(&ds, None, &cfg, AdaptationModel::init(4, 6, 0).unwrap()).unwrap();
        let epochs: Vec<usize> = trace.snapshots.iter().map(|(e, _)| *e).collect();
        assert_eq!(epochs, vec![3, 6, 9, 10]);
    }

    #[test]
    fn huge_learning_rate_diverges_with_epoch() {
        let ds = random_pairs(20, 4, 0);
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 1e308,
            ..small_cfg(5)
        };
        match train(&ds, None, &cfg, AdaptationModel::init(4, 8, 0).unwrap()) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch <= 5),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig {
                sigma: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                eval_ks: vec![5, 10],
                ..TrainConfig::default()
            },
            TrainConfig {
                checkpoint: CheckpointPolicy::Every(0),
                ..TrainConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn swap_symmetry_of_training_loss() {
        let ds = random_pairs(12, 5, 3);
        let w = AdaptationModel::init(5, 9, 1).unwrap();
        let a = loss_and_gradient(
            w.weights().view(),
            ds.left().view(),
            ds.right().view(),
            15.0,
        )
        .unwrap();
        let b = loss_and_gradient(
            w.weights().view(),
            ds.right().view(),
            ds.left().view(),
            15.0,
        )
        .unwrap();
        assert_eq!(a.loss, b.loss);
    }

    #[test]
    fn csv_shapes() {
        let ds = random_pairs(10, 3, 5);
        let (_, trace) = train(
            &ds,
            Some(&ds),
            &small_cfg(2),
            AdaptationModel::init(3, 4, 0).unwrap(),
        )
        .unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,loss,train_ar1,test_ar1");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("2,"));
        assert!(trace.test_curve_csv().starts_with("epoch,k1,k3\n0,"));
    }
}
