//! `simadapt`: generate or load paired embeddings, reduce, train the
//! adaptation over many seeded runs, evaluate and report.
//!
//! Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O.

mod config;
mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use simadapt::adapter::AdaptationModel;
use simadapt::eval::{rank_pairs, rank_pairs_with_tie, recall_curve, TieRule};
use simadapt::experiment::{self, PcaFit};
use simadapt::synth::{self, SynthConfig};
use simadapt::{ExperimentConfig, PairedDataset, PcaModel, TrainConfig};

use config::{parse_optimizer, pick, resolve_seed, FileConfig, ResolvedTrain};

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<simadapt::Error> for CliError {
    fn from(e: simadapt::Error) -> Self {
        let code = if e.is_numerical() {
            3
        } else if e.is_io() {
            4
        } else {
            2
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "simadapt",
    version,
    about = "Learned visual-similarity adaptation of image embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired dataset.
    Gen(GenArgs),
    /// Fit PCA on a dataset and write the reduced dataset.
    Reduce(ReduceArgs),
    /// Run the multi-run training protocol and write per-run outputs and the report.
    Train(TrainArgs),
    /// Score a dataset, optionally through a PCA model and an adaptation checkpoint.
    Eval(EvalArgs),
    /// Aggregate an existing results directory into report tables.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    Small,
}

#[derive(Clone, Copy, ValueEnum)]
enum PcaFitArg {
    Joint,
    PerSide,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Optimistic,
    Pessimistic,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_pairs: Option<usize>,
    #[arg(long)]
    visual_dim: Option<usize>,
    #[arg(long)]
    semantic_dim: Option<usize>,
    #[arg(long)]
    ambient_dim: Option<usize>,
    #[arg(long)]
    semantic_strength: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Args)]
struct ReduceArgs {
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pca_dim: Option<usize>,
    /// Fit on this fraction of the pairs (seeded split) instead of all of them.
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Results directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pca_dim: Option<usize>,
    #[arg(long, value_enum)]
    pca_fit: Option<PcaFitArg>,
    #[arg(long)]
    adapt_dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Temperature; repeat for several (one report column each).
    #[arg(long)]
    sigma: Vec<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    /// adam or sgd
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rank cutoffs, comma separated; must start at 1.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Maximum concurrent runs.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    model_name: Option<String>,
    #[arg(long)]
    dataset_name: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory written by `reduce` or a run's `pca/`.
    #[arg(long)]
    pca: Option<PathBuf>,
    /// Directory holding `model.emb` and `model.json`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,50")]
    ks: Vec<usize>,
    #[arg(long, value_enum, default_value = "optimistic")]
    tie: TieArg,
    /// Write `k,ar` CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => report::cmd_report(&a.results).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn cmd_gen(a: GenArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.config.as_deref())?;
    let preset = match (a.preset, file.preset.as_deref()) {
        (Some(p), _) => p,
        (None, None | Some("default")) => Preset::Default,
        (None, Some("small")) => Preset::Small,
        (None, Some(other)) => return Err(CliError::usage(format!("unknown preset {other:?}"))),
    };
    let base = match preset {
        Preset::Default => SynthConfig::default(),
        Preset::Small => SynthConfig {
            n_pairs: 200,
            visual_dim: 8,
            semantic_dim: 16,
            ambient_dim: 64,
            ..SynthConfig::default()
        },
    };
    let cfg = SynthConfig {
        n_pairs: pick(a.n_pairs, file.n_pairs, base.n_pairs),
        visual_dim: pick(a.visual_dim, file.visual_dim, base.visual_dim),
        semantic_dim: pick(a.semantic_dim, file.semantic_dim, base.semantic_dim),
        ambient_dim: pick(a.ambient_dim, file.ambient_dim, base.ambient_dim),
        semantic_strength: pick(
            a.semantic_strength,
            file.semantic_strength,
            base.semantic_strength,
        ),
        noise_std: pick(a.noise_std, file.noise_std, base.noise_std),
        seed: resolve_seed(a.seed, file.seed)?,
    };
    let ds = synth::generate(&cfg)?;
    ds.save_dir(&a.out)?;
    write_text(&a.out.join("synth_config.json"), &to_json(&cfg))?;
    eprintln!(
        "wrote {} pairs of dimension {} to {}",
        ds.len(),
        ds.dim(),
        a.out.display()
    );
    Ok(())
}

fn cmd_reduce(a: ReduceArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.config.as_deref())?;
    let ds = PairedDataset::load_manifest(&a.data)?;
    let k = pick(a.pca_dim, file.pca_dim, 256);
    let seed = resolve_seed(a.seed, file.seed)?;
    let fit_rows = match a.train_frac.or(file.train_frac) {
        Some(frac) => {
            let split = simadapt::store::split_pairs(ds.len(), frac, seed)?;
            ds.subset(&split.train)?
        }
        None => ds.clone(),
    };
    let pca = PcaModel::fit(&fit_rows.left().vstack(fit_rows.right())?, k)?;
    let reduced = PairedDataset::new(
        pca.transform(ds.left())?,
        pca.transform(ds.right())?,
        ds.pair_ids().to_vec(),
    )?;
    reduced.save_dir(&a.out)?;
    pca.save(a.out.join("pca"))?;
    let resolved = serde_json::json!({
        "data": a.data,
        "pca_dim": k,
        "train_frac": a.train_frac.or(file.train_frac),
        "seed": seed,
        "pca_variance_sum": pca.variance_sum(),
    });
    write_text(&a.out.join("resolved_config.json"), &to_json(&resolved))?;
    println!("pca_variance_sum,{}", pca.variance_sum());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.config.as_deref())?;
    let defaults = ExperimentConfig::default();
    let sigmas = if !a.sigma.is_empty() {
        a.sigma.clone()
    } else {
        file.sigma
            .clone()
            .unwrap_or_else(|| vec![defaults.train.sigma])
    };
    let optimizer = match a.optimizer.as_deref().or(file.optimizer.as_deref()) {
        Some(name) => parse_optimizer(name)?,
        None => defaults.train.optimizer,
    };
    let pca_fit = match a.pca_fit {
        Some(PcaFitArg::Joint) => Some(PcaFit::Joint),
        Some(PcaFitArg::PerSide) => Some(PcaFit::PerSide),
        None => None,
    };
    let base = ExperimentConfig {
        train_fraction: pick(a.train_frac, file.train_frac, defaults.train_fraction),
        pca_dim: pick(a.pca_dim, file.pca_dim, defaults.pca_dim),
        adapt_dim: pick(a.adapt_dim, file.adapt_dim, defaults.adapt_dim),
        pca_fit: pick(pca_fit, file.pca_fit, defaults.pca_fit),
        n_runs: pick(a.runs, file.runs, defaults.n_runs),
        base_seed: resolve_seed(a.seed, file.seed)?,
        n_bootstrap: pick(a.bootstrap, file.bootstrap, defaults.n_bootstrap),
        train: TrainConfig {
            epochs: pick(a.epochs, file.epochs, defaults.train.epochs),
            learning_rate: pick(a.lr, file.learning_rate, defaults.train.learning_rate),
            optimizer,
            eval_ks: pick(
                a.ks.clone(),
                file.ks.clone(),
                defaults.train.eval_ks.clone(),
            ),
            ..defaults.train.clone()
        },
    };
    let resolved = ResolvedTrain {
        data: a.data.display().to_string(),
        model_name: pick(
            a.model_name.clone(),
            file.model_name.clone(),
            "synthetic".into(),
        ),
        dataset_name: pick(
            a.dataset_name.clone(),
            file.dataset_name.clone(),
            dataset_label(&a.data),
        ),
        sigmas: sigmas.clone(),
        jobs: a.jobs.or(file.jobs),
        experiment: base.clone(),
    };
    let mut probes = Vec::new();
    for &sigma in &sigmas {
        let cfg = ExperimentConfig {
            train: TrainConfig {
                sigma,
                ..base.train.clone()
            },
            ..base.clone()
        };
        cfg.validate()?;
        probes.push(cfg);
    }
    if sigmas
        .iter()
        .enumerate()
        .any(|(i, s)| sigmas[..i].contains(s))
    {
        return Err(CliError::usage("duplicate --sigma values"));
    }
    let ds = PairedDataset::load_manifest(&a.data)?;

    create_dir(&a.out)?;
    write_text(&a.out.join("resolved_config.json"), &to_json(&resolved))?;
    let manifest = serde_json::json!({
        "tool": "simadapt",
        "version": env!("CARGO_PKG_VERSION"),
        "config_file": a.config,
        "output_dir": a.out,
        "seeds": (0..base.n_runs).map(|r| base.run_seed(r)).collect::<Vec<_>>(),
        "resolved": resolved,
    });
    write_text(&a.out.join("run_manifest.json"), &to_json(&manifest))?;

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = resolved.jobs {
            b = b.num_threads(j.max(1));
        }
        b.build().map_err(|e| CliError::usage(e.to_string()))?
    };
    let mut failures = Vec::new();
    for cfg in &probes {
        let dir = a.out.join(report::sigma_dir_name(cfg.train.sigma));
        create_dir(&dir)?;
        eprintln!("sigma {}: {} runs", cfg.train.sigma, cfg.n_runs);
        let results = pool.install(|| experiment::run_all(&ds, cfg))?;
        let hash = cfg.fingerprint();
        let mut failed = Vec::new();
        for r in &results {
            match r {
                Ok(run) => match experiment::write_run(&dir, run, &hash) {
                    Ok(_) => {}
                    Err(e) if e.is_numerical() => {
                        let _ =
                            fs::remove_dir_all(dir.join(experiment::run_dir_name(run.summary.run)));
                        failed.push(experiment::RunFailure {
                            run: run.summary.run,
                            seed: run.summary.seed,
                            message: e.to_string(),
                            numerical: true,
                        })
                    }
                    Err(e) => return Err(e.into()),
                },
                Err(f) => failed.push(f.clone()),
            }
        }
        experiment::write_failures(&dir, &failed)?;
        failures.extend(failed.into_iter().map(|f| (cfg.train.sigma, f)));
    }

    if failures.len() < probes.len() * base.n_runs {
        report::cmd_report(&a.out)?;
    }
    if failures.is_empty() {
        return Ok(());
    }
    for (sigma, f) in &failures {
        eprintln!(
            "sigma {sigma} run {} (seed {}): {}",
            f.run, f.seed, f.message
        );
    }
    let summary = format!(
        "{} of {} runs failed",
        failures.len(),
        probes.len() * base.n_runs
    );
    if failures.iter().any(|(_, f)| f.numerical) {
        Err(CliError::numerical(summary))
    } else {
        Err(CliError::usage(summary))
    }
}

fn dataset_label(manifest: &Path) -> String {
    manifest
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let mut ds = PairedDataset::load_manifest(&a.data)?;
    if let Some(dir) = &a.pca {
        let pca = PcaModel::load(dir)?;
        ds = PairedDataset::new(
            pca.transform(ds.left())?,
            pca.transform(ds.right())?,
            ds.pair_ids().to_vec(),
        )?;
    }
    if let Some(dir) = &a.model {
        let (model, _) = AdaptationModel::load(dir, "model")?;
        ds = PairedDataset::new(
            model.forward(ds.left())?,
            model.forward(ds.right())?,
            ds.pair_ids().to_vec(),
        )?;
    }
    let ranks = match a.tie {
        TieArg::Optimistic => rank_pairs(ds.left(), ds.right())?,
        TieArg::Pessimistic => rank_pairs_with_tie(ds.left(), ds.right(), TieRule::Pessimistic)?,
    };
    let mut csv = String::from("k,ar\n");
    for (k, v) in recall_curve(&ranks, &a.ks)? {
        csv.push_str(&format!("{k},{v}\n"));
    }
    match &a.out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
