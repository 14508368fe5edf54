//! Aggregation of an existing results directory. Never retrains.

use std::path::Path;

use simadapt::eval::report::{curve_csv, table_csv};
use simadapt::experiment::{load_runs, ExperimentReport};
use simadapt::{ExperimentConfig, TrainConfig};

use crate::config::ResolvedTrain;
use crate::{write_text, CliError};

pub fn sigma_dir_name(sigma: f64) -> String {
    format!("sigma_{sigma}")
}

/// Writes `report.csv`, `report.json` and the per-cutoff curves. Missing
/// or unreadable run outputs are listed and turn into an error after the
/// remaining runs have been reported.
pub fn cmd_report(results: &Path) -> Result<Vec<ExperimentReport>, CliError> {
    let config_path = results.join("resolved_config.json");
    if !config_path.exists() {
        return Err(CliError::io(format!(
            "no runs found in {}",
            results.display()
        )));
    }
    let text = std::fs::read_to_string(&config_path)
        .map_err(|e| CliError::io(format!("{}: {e}", config_path.display())))?;
    let resolved: ResolvedTrain = serde_json::from_str(&text)
        .map_err(|e| CliError::io(format!("{}: {e}", config_path.display())))?;
    let base = &resolved.experiment;

    let mut problems = Vec::new();
    let mut reports = Vec::new();
    for &sigma in &resolved.sigmas {
        let dir = results.join(sigma_dir_name(sigma));
        if !dir.is_dir() {
            problems.push(format!("{}: missing", dir.display()));
            continue;
        }
        let loaded = load_runs(&dir, Some(base.n_runs))?;
        problems.extend(loaded.problems);
        if loaded.runs.is_empty() {
            problems.push(format!("{}: no completed runs", dir.display()));
            continue;
        }
        let cfg = ExperimentConfig {
            train: TrainConfig {
                sigma,
                ..base.train.clone()
            },
            ..base.clone()
        };
        reports.push(ExperimentReport::aggregate(
            sigma,
            &loaded.ks,
            &cfg.fingerprint(),
            loaded.runs,
            loaded.failures,
            base.n_bootstrap,
            base.base_seed,
        )?);
    }
    if reports.is_empty() {
        let mut msg = format!("no runs found in {}", results.display());
        for p in &problems {
            msg.push_str(&format!("\n  {p}"));
        }
        return Err(CliError::io(msg));
    }

    let refs: Vec<&ExperimentReport> = reports.iter().collect();
    let table = table_csv(&resolved.model_name, &resolved.dataset_name, &refs)
        .ok_or_else(|| CliError::usage("rank cutoffs do not include 1"))?;
    write_text(&results.join("report.csv"), &table)?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    write_text(&results.join("report.json"), &json)?;
    let first = &reports[0];
    write_text(
        &results.join("curve_concat.csv"),
        &curve_csv(&first.ks, &first.concat),
    )?;
    write_text(
        &results.join("curve_pca.csv"),
        &curve_csv(&first.ks, &first.pca),
    )?;
    for r in &reports {
        let name = format!("curve_adapted_sigma{}.csv", r.sigma);
        write_text(&results.join(name), &curve_csv(&r.ks, &r.adapted_selected))?;
    }
    print!("{table}");

    if problems.is_empty() {
        Ok(reports)
    } else {
        let mut msg = String::from("incomplete results:");
        for p in &problems {
            msg.push_str(&format!("\n  {p}"));
        }
        Err(CliError::io(msg))
    }
}
