//! Settings resolution: command-line flag, then config file, then built-in
//! default. `SIMADAPT_SEED` replaces only the built-in default seed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use simadapt::experiment::PcaFit;
use simadapt::Optimizer;

use crate::CliError;

pub const SEED_ENV: &str = "SIMADAPT_SEED";

/// Every key a config file may set. All optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    // gen
    pub preset: Option<String>,
    pub n_pairs: Option<usize>,
    pub visual_dim: Option<usize>,
    pub semantic_dim: Option<usize>,
    pub ambient_dim: Option<usize>,
    pub semantic_strength: Option<f64>,
    pub noise_std: Option<f64>,
    // reduce / train
    pub pca_dim: Option<usize>,
    pub pca_fit: Option<PcaFit>,
    pub adapt_dim: Option<usize>,
    pub epochs: Option<usize>,
    pub sigma: Option<Vec<f64>>,
    pub runs: Option<usize>,
    pub train_frac: Option<f64>,
    pub learning_rate: Option<f64>,
    pub optimizer: Option<String>,
    pub ks: Option<Vec<usize>>,
    pub bootstrap: Option<usize>,
    pub jobs: Option<usize>,
    pub model_name: Option<String>,
    pub dataset_name: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn parse_optimizer(name: &str) -> Result<Optimizer, CliError> {
    match name {
        "adam" => Ok(Optimizer::adam()),
        "sgd" => Ok(Optimizer::Sgd),
        other => Err(CliError::usage(format!(
            "unknown optimizer {other:?} (expected adam or sgd)"
        ))),
    }
}

/// Written next to every output as `resolved_config.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedTrain {
    pub data: String,
    pub model_name: String,
    pub dataset_name: String,
    pub sigmas: Vec<f64>,
    pub jobs: Option<usize>,
    pub experiment: simadapt::ExperimentConfig,
}
