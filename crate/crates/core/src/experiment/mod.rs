//! Multi-run protocol: for each run, split the pairs, fit PCA on the
//! training side, train an adaptation, and score the held-out pairs before
//! and after adaptation.

mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapter::{train, AdaptationModel, TrainConfig, TrainTrace};
use crate::error::{Error, Result};
use crate::eval::{rank_pairs, recall_curve, select_epoch_from_scores, Summary};
use crate::pca::PcaModel;
use crate::store::{split_pairs, PairedDataset};

pub use output::{load_runs, run_dir_name, write_failures, write_run, LoadedRuns, RunArtifacts};

/// How PCA is fitted on the training pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaFit {
    /// One basis from the union of left and right training rows.
    #[default]
    Joint,
    /// Separate bases for the left and the right side.
    PerSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train_fraction: f64,
    pub pca_dim: usize,
    pub adapt_dim: usize,
    pub pca_fit: PcaFit,
    pub n_runs: usize,
    /// Run `r` splits and initializes with `base_seed + r`.
    pub base_seed: u64,
    pub n_bootstrap: usize,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            pca_dim: 256,
            adapt_dim: 1024,
            pca_fit: PcaFit::Joint,
            n_runs: 20,
            base_seed: 0,
            n_bootstrap: 1000,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::invalid("at least one run is required"));
        }
        if self.pca_dim == 0 || self.adapt_dim == 0 {
            return Err(Error::invalid(
                "PCA and adaptation dimensions must be positive",
            ));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::invalid("bootstrap needs at least one resample"));
        }
        self.train.validate()
    }

    pub fn ks(&self) -> &[usize] {
        &self.train.eval_ks
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }

    /// Short hex digest of the serialized configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Everything a report needs from one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub concat_dim: usize,
    pub pca_variance_sum: f64,
    /// Test aR at each cutoff on the raw descriptors.
    pub concat_recall: Vec<f64>,
    /// Test aR at each cutoff after PCA, before adaptation.
    pub pca_recall: Vec<f64>,
    pub epochs: Vec<usize>,
    /// `test_curve[e][k]`: adapted test aR at `epochs[e]` and cutoff `k`.
    pub test_curve: Vec<Vec<f64>>,
}

impl RunSummary {
    pub fn adapted_final(&self) -> &[f64] {
        self.test_curve.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn adapted_at(&self, epoch: usize) -> Option<&[f64]> {
        let i = self.epochs.iter().position(|&e| e == epoch)?;
        Some(&self.test_curve[i])
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub pca: PcaModel,
    pub model: AdaptationModel,
    pub trace: TrainTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub seed: u64,
    pub message: String,
    pub numerical: bool,
}

/// Aggregated scores of one configuration (one temperature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub sigma: f64,
    pub ks: Vec<usize>,
    pub config_fingerprint: String,
    pub n_runs: usize,
    pub concat_dim: usize,
    pub pca_variance_sum: Summary,
    pub concat: Vec<Summary>,
    pub pca: Vec<Summary>,
    /// After the configured number of epochs.
    pub adapted_final: Vec<Summary>,
    /// Epoch chosen by bootstrapping test scores (oracle-selected).
    pub selected_epoch: usize,
    pub adapted_selected: Vec<Summary>,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<RunFailure>,
}

fn per_k(ks: &[usize], runs: &[RunSummary], pick: impl Fn(&RunSummary) -> &[f64]) -> Vec<Summary> {
    (0..ks.len())
        .map(|k| {
            let values: Vec<f64> = runs.iter().map(|r| pick(r)[k]).collect();
            Summary::of(&values)
        })
        .collect()
}

impl ExperimentReport {
    /// Aggregates completed runs. The epoch selection draws from
    /// `bootstrap_seed`.
    pub fn aggregate(
        sigma: f64,
        ks: &[usize],
        config_fingerprint: &str,
        mut runs: Vec<RunSummary>,
        failures: Vec<RunFailure>,
        n_bootstrap: usize,
        bootstrap_seed: u64,
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::invalid("no completed runs to aggregate"));
        }
        runs.sort_by_key(|r| r.run);
        let epochs = runs[0].epochs.clone();
        for r in &runs {
            let lengths_ok = r.concat_recall.len() == ks.len()
                && r.pca_recall.len() == ks.len()
                && r.test_curve.len() == r.epochs.len()
                && r.test_curve.iter().all(|c| c.len() == ks.len());
            if !lengths_ok {
                return Err(Error::invalid(format!(
                    "run {} has inconsistent score lengths",
                    r.run
                )));
            }
            if r.epochs != epochs {
                return Err(Error::invalid(format!(
                    "run {} covers different epochs",
                    r.run
                )));
            }
        }
        let ar1: Vec<Vec<f64>> = runs
            .iter()
            .map(|r| r.test_curve.iter().map(|c| c[0]).collect())
            .collect();
        let selected_epoch = select_epoch_from_scores(&epochs, &ar1, n_bootstrap, bootstrap_seed)?;
        let variance: Vec<f64> = runs.iter().map(|r| r.pca_variance_sum).collect();
        Ok(Self {
            sigma,
            ks: ks.to_vec(),
            config_fingerprint: config_fingerprint.to_owned(),
            n_runs: runs.len(),
            concat_dim: runs[0].concat_dim,
            pca_variance_sum: Summary::of(&variance),
            concat: per_k(ks, &runs, |r| &r.concat_recall),
            pca: per_k(ks, &runs, |r| &r.pca_recall),
            adapted_final: per_k(ks, &runs, RunSummary::adapted_final),
            selected_epoch,
            adapted_selected: per_k(ks, &runs, |r| {
                r.adapted_at(selected_epoch).expect("epoch present")
            }),
            runs,
            failures,
        })
    }

    /// Index of cutoff `k` in [`Self::ks`].
    pub fn k_index(&self, k: usize) -> Option<usize> {
        self.ks.iter().position(|&x| x == k)
    }
}

/// One complete run of the protocol.
pub fn run_once(ds: &PairedDataset, cfg: &ExperimentConfig, run: usize) -> Result<RunResult> {
    let seed = cfg.run_seed(run);
    let ks = cfg.ks();
    let split = split_pairs(ds.len(), cfg.train_fraction, seed)?;
    let train_raw = ds.subset(&split.train)?;
    let test_raw = ds.subset(&split.test)?;

    let concat = rank_pairs(test_raw.left(), test_raw.right())?;
    let concat_recall = recall_curve(&concat, ks)?
        .into_iter()
        .map(|(_, v)| v)
        .collect();

    let (pca, train_set, test_set, variance) = match cfg.pca_fit {
        PcaFit::Joint => {
            let pca = PcaModel::fit(&train_raw.left().vstack(train_raw.right())?, cfg.pca_dim)?;
            let reduce = |d: &PairedDataset| -> Result<PairedDataset> {
                PairedDataset::new(
                    pca.transform(d.left())?,
                    pca.transform(d.right())?,
                    d.pair_ids().to_vec(),
                )
            };
            let (tr, te) = (reduce(&train_raw)?, reduce(&test_raw)?);
            let v = pca.variance_sum();
            (pca, tr, te, v)
        }
        PcaFit::PerSide => {
            let pl = PcaModel::fit(train_raw.left(), cfg.pca_dim)?;
            let pr = PcaModel::fit(train_raw.right(), cfg.pca_dim)?;
            let reduce = |d: &PairedDataset| -> Result<PairedDataset> {
                PairedDataset::new(
                    pl.transform(d.left())?,
                    pr.transform(d.right())?,
                    d.pair_ids().to_vec(),
                )
            };
            let (tr, te) = (reduce(&train_raw)?, reduce(&test_raw)?);
            let v = 0.5 * (pl.variance_sum() + pr.variance_sum());
            (pl, tr, te, v)
        }
    };
    let pca_ranks = rank_pairs(test_set.left(), test_set.right())?;
    let pca_recall = recall_curve(&pca_ranks, ks)?
        .into_iter()
        .map(|(_, v)| v)
        .collect();

    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let model = AdaptationModel::init(cfg.pca_dim, cfg.adapt_dim, seed)?;
    let (model, trace) = train(&train_set, Some(&test_set), &train_cfg, model)?;

    let summary = RunSummary {
        run,
        seed,
        n_train: split.train.len(),
        n_test: split.test.len(),
        concat_dim: ds.dim(),
        pca_variance_sum: variance,
        concat_recall,
        pca_recall,
        epochs: trace.records.iter().map(|r| r.epoch).collect(),
        test_curve: trace
            .records
            .iter()
            .map(|r| r.test_recall.clone())
            .collect(),
    };
    Ok(RunResult {
        summary,
        pca,
        model,
        trace,
    })
}

/// Runs every seed, concurrently on the current rayon pool. Results come
/// back in run order; a failed run does not stop the others.
pub fn run_all(
    ds: &PairedDataset,
    cfg: &ExperimentConfig,
) -> Result<Vec<Result<RunResult, RunFailure>>> {
    cfg.validate()?;
    Ok((0..cfg.n_runs)
        .into_par_iter()
        .map(|run| {
            run_once(ds, cfg, run).map_err(|e| RunFailure {
                run,
                seed: cfg.run_seed(run),
                numerical: e.is_numerical(),
                message: e.to_string(),
            })
        })
        .collect())
}

pub fn summarize(
    cfg: &ExperimentConfig,
    results: &[Result<RunResult, RunFailure>],
) -> Result<ExperimentReport> {
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(r) => runs.push(r.summary.clone()),
            Err(f) => failures.push(f.clone()),
        }
    }
    if runs.is_empty() {
        let detail = failures
            .iter()
            .map(|f| format!("run {}: {}", f.run, f.message))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::invalid(format!("every run failed: {detail}")));
    }
    ExperimentReport::aggregate(
        cfg.train.sigma,
        cfg.ks(),
        &cfg.fingerprint(),
        runs,
        failures,
        cfg.n_bootstrap,
        cfg.base_seed,
    )
}

/// Runs the full protocol and aggregates it.
pub fn run_experiment(ds: &PairedDataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    summarize(cfg, &run_all(ds, cfg)?)
}
