//! On-disk layout of experiment results.
//!
//! ```text
//! <sigma dir>/
//!   failures.json            runs that errored (absent when none did)
//!   run_000/
//!     run.json               scalars: run, seed, split sizes, PCA variance sum
//!     metrics.csv            k,concat,pca,adapted_final
//!     trace.csv              epoch,loss,train_ar1,test_ar1
//!     test_curve.csv         epoch,k1,k5,...
//!     model.emb, model.json  final adaptation weights
//!     pca/                   fitted PCA
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RunFailure, RunResult, RunSummary};
use crate::error::{Error, Result};

const REQUIRED: [&str; 4] = ["run.json", "metrics.csv", "trace.csv", "test_curve.csv"];

#[derive(Serialize, Deserialize)]
struct RunScalars {
    run: usize,
    seed: u64,
    n_train: usize,
    n_test: usize,
    concat_dim: usize,
    pca_variance_sum: f64,
}

/// Paths written for one run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn run_dir_name(run: usize) -> String {
    format!("run_{run:03}")
}

pub fn write_run(dir: &Path, result: &RunResult, config_hash: &str) -> Result<RunArtifacts> {
    let s = &result.summary;
    let dir = dir.join(run_dir_name(s.run));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let scalars = RunScalars {
        run: s.run,
        seed: s.seed,
        n_train: s.n_train,
        n_test: s.n_test,
        concat_dim: s.concat_dim,
        pca_variance_sum: s.pca_variance_sum,
    };
    write(
        &dir.join("run.json"),
        serde_json::to_string_pretty(&scalars).expect("scalars serialize") + "\n",
    )?;

    let mut metrics = String::from("k,concat,pca,adapted_final\n");
    let last = s.adapted_final();
    for (i, k) in result.trace.ks.iter().enumerate() {
        metrics.push_str(&format!(
            "{k},{},{},{}\n",
            s.concat_recall[i], s.pca_recall[i], last[i]
        ));
    }
    write(&dir.join("metrics.csv"), metrics)?;
    write(&dir.join("trace.csv"), result.trace.to_csv())?;
    write(&dir.join("test_curve.csv"), result.trace.test_curve_csv())?;
    result.model.save(&dir, "model", config_hash)?;
    result.pca.save(dir.join("pca"))?;
    Ok(RunArtifacts { dir })
}

pub fn write_failures(dir: &Path, failures: &[RunFailure]) -> Result<()> {
    let path = dir.join("failures.json");
    if failures.is_empty() {
        if path.exists() {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
        return Ok(());
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(
        &path,
        serde_json::to_string_pretty(failures).expect("failures serialize") + "\n",
    )
}

#[derive(Debug, Clone, Default)]
pub struct LoadedRuns {
    pub ks: Vec<usize>,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<RunFailure>,
    /// Human-readable description of every missing or unreadable output.
    pub problems: Vec<String>,
}

/// Reads every `run_*` directory under `dir`. Runs with missing files are
/// reported in `problems` rather than failing the whole load. When
/// `expected_runs` is given, absent run directories that are not recorded
/// as failures are reported too.
pub fn load_runs(dir: &Path, expected_runs: Option<usize>) -> Result<LoadedRuns> {
    let mut out = LoadedRuns::default();
    let failures_path = dir.join("failures.json");
    if failures_path.exists() {
        out.failures =
            serde_json::from_str(&read(&failures_path)?).map_err(|source| Error::Json {
                path: failures_path.clone(),
                source,
            })?;
    }
    let mut run_dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .is_some_and(|n| n.to_string_lossy().starts_with("run_"))
        })
        .collect();
    run_dirs.sort();

    for run_dir in &run_dirs {
        let missing: Vec<&str> = REQUIRED
            .iter()
            .copied()
            .filter(|f| !run_dir.join(f).exists())
            .collect();
        if !missing.is_empty() {
            out.problems.push(format!(
                "{}: missing {}",
                run_dir.display(),
                missing.join(", ")
            ));
            continue;
        }
        match load_one(run_dir) {
            Ok((ks, summary)) => {
                if out.ks.is_empty() {
                    out.ks = ks;
                } else if out.ks != ks {
                    out.problems.push(format!(
                        "{}: rank cutoffs {ks:?} differ from {:?}",
                        run_dir.display(),
                        out.ks
                    ));
                    continue;
                }
                out.runs.push(summary);
            }
            Err(e) => out.problems.push(format!("{}: {e}", run_dir.display())),
        }
    }
    if let Some(n) = expected_runs {
        for run in 0..n {
            let present = out.runs.iter().any(|r| r.run == run)
                || out.failures.iter().any(|f| f.run == run)
                || run_dirs.iter().any(|d| d.ends_with(run_dir_name(run)));
            if !present {
                out.problems.push(format!(
                    "{}: missing",
                    dir.join(run_dir_name(run)).display()
                ));
            }
        }
    }
    out.runs.sort_by_key(|r| r.run);
    Ok(out)
}

fn parse_f64(path: &Path, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{}: bad number {field:?}", path.display())))
}

fn parse_usize(path: &Path, field: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{}: bad integer {field:?}", path.display())))
}

fn csv_rows(path: &Path, header_prefix: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = read(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(str::to_owned)
        .collect();
    if header.first().map(String::as_str) != Some(header_prefix) {
        return Err(Error::invalid(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let rows: Vec<Vec<String>> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    if rows.iter().any(|r| r.len() != header.len()) {
        return Err(Error::invalid(format!("{}: ragged rows", path.display())));
    }
    Ok((header, rows))
}

fn load_one(run_dir: &Path) -> Result<(Vec<usize>, RunSummary)> {
    let scalars_path = run_dir.join("run.json");
    let scalars: RunScalars =
        serde_json::from_str(&read(&scalars_path)?).map_err(|source| Error::Json {
            path: scalars_path,
            source,
        })?;

    let metrics_path = run_dir.join("metrics.csv");
    let (_, rows) = csv_rows(&metrics_path, "k")?;
    let mut ks = Vec::new();
    let mut concat = Vec::new();
    let mut pca = Vec::new();
    for r in &rows {
        ks.push(parse_usize(&metrics_path, &r[0])?);
        concat.push(parse_f64(&metrics_path, &r[1])?);
        pca.push(parse_f64(&metrics_path, &r[2])?);
    }

    let curve_path = run_dir.join("test_curve.csv");
    let (header, rows) = csv_rows(&curve_path, "epoch")?;
    if header.len() != ks.len() + 1 {
        return Err(Error::invalid(format!(
            "{}: column count does not match metrics",
            curve_path.display()
        )));
    }
    let mut epochs = Vec::new();
    let mut test_curve = Vec::new();
    for r in &rows {
        epochs.push(parse_usize(&curve_path, &r[0])?);
        test_curve.push(
            r[1..]
                .iter()
                .map(|f| parse_f64(&curve_path, f))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if epochs.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no epochs",
            curve_path.display()
        )));
    }
    Ok((
        ks,
        RunSummary {
            run: scalars.run,
            seed: scalars.seed,
            n_train: scalars.n_train,
            n_test: scalars.n_test,
            concat_dim: scalars.concat_dim,
            pca_variance_sum: scalars.pca_variance_sum,
            concat_recall: concat,
            pca_recall: pca,
            epochs,
            test_curve,
        },
    ))
}
