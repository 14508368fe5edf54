use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_simadapt"));
    c.env_remove("SIMADAPT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_small(dir: &Path, seed: &str) -> PathBuf {
    let o = run(&["gen", "--preset", "small", "--seed", seed, "--out", s(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("manifest.json")
}

const SMALL_TRAIN: &[&str] = &[
    "--epochs",
    "5",
    "--pca-dim",
    "32",
    "--adapt-dim",
    "64",
    "--bootstrap",
    "50",
];

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", s(data), "--out", s(out)];
    args.extend_from_slice(SMALL_TRAIN);
    if !extra.contains(&"--runs") {
        args.extend_from_slice(&["--runs", "2"]);
    }
    args.extend_from_slice(extra);
    run(&args)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    (header, rows)
}

#[test]
fn gen_is_byte_identical_for_a_seed() {
    let tmp = TempDir::new().unwrap();
    gen_small(&tmp.path().join("a"), "7");
    gen_small(&tmp.path().join("b"), "7");
    gen_small(&tmp.path().join("c"), "8");
    for f in ["left.emb", "right.emb", "manifest.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    assert_ne!(
        fs::read(tmp.path().join("a/left.emb")).unwrap(),
        fs::read(tmp.path().join("c/left.emb")).unwrap()
    );
}

#[test]
fn seed_comes_from_env_when_no_flag() {
    let tmp = TempDir::new().unwrap();
    gen_small(&tmp.path().join("flag"), "5");
    let o = bin()
        .env("SIMADAPT_SEED", "5")
        .args([
            "gen",
            "--preset",
            "small",
            "--out",
            s(&tmp.path().join("env")),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(tmp.path().join("flag/left.emb")).unwrap(),
        fs::read(tmp.path().join("env/left.emb")).unwrap()
    );
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["gen"])), 2);
    assert_eq!(code(&run(&["train", "--out", "x"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);

    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "nonsense_key = 1\n").unwrap();
    let o = run(&[
        "gen",
        "--out",
        s(&tmp.path().join("d")),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(code(&o), 2);

    let data = gen_small(&tmp.path().join("data"), "1");
    let o = train(&data, &tmp.path().join("r"), &["--ks", "5,10"]);
    assert_eq!(code(&o), 2, "cutoffs must start at 1");
}

#[test]
fn io_errors_exit_4() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["eval", "--data", s(&tmp.path().join("nope.json"))]);
    assert_eq!(code(&o), 4);
    let o = run(&["report", "--results", s(tmp.path())]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no runs found"));
}

#[test]
fn divergent_training_exits_3_with_failure_summary() {
    let tmp = TempDir::new().unwrap();
    let data = gen_small(&tmp.path().join("data"), "1");
    let out = tmp.path().join("res");
    let o = train(&data, &out, &["--optimizer", "sgd", "--lr", "1e308"]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("run 0") && err.contains("run 1"), "{err}");
    let failures: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sigma_15/failures.json")).unwrap())
            .unwrap();
    assert_eq!(failures.as_array().unwrap().len(), 2);
}

#[test]
fn train_writes_runs_and_report_for_each_sigma() {
    let tmp = TempDir::new().unwrap();
    let data = gen_small(&tmp.path().join("data"), "2");
    let out = tmp.path().join("res");
    let o = train(&data, &out, &["--sigma", "1", "--sigma", "15"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    for sigma in ["sigma_1", "sigma_15"] {
        for run in ["run_000", "run_001"] {
            let d = out.join(sigma).join(run);
            for f in [
                "run.json",
                "metrics.csv",
                "trace.csv",
                "test_curve.csv",
                "model.emb",
                "model.json",
            ] {
                assert!(d.join(f).exists(), "{}", d.join(f).display());
            }
            let (_, trace) = read_csv(&d.join("trace.csv"));
            assert_eq!(trace.len(), 6, "epochs 0..=5");
        }
    }
    let (header, rows) = read_csv(&out.join("report.csv"));
    assert_eq!(header.len(), 10);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].iter().all(|c| !c.is_empty()), "{:?}", rows[0]);
    for f in [
        "curve_concat.csv",
        "curve_pca.csv",
        "curve_adapted_sigma1.csv",
        "curve_adapted_sigma15.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }

    // A run's checkpoint and PCA evaluate to the same final scores.
    let run0 = out.join("sigma_15/run_000");
    let eval = run(&[
        "eval",
        "--data",
        s(&data),
        "--pca",
        s(&run0.join("pca")),
        "--model",
        s(&run0),
        "--ks",
        "1,5",
    ]);
    assert_eq!(code(&eval), 0);
    assert!(String::from_utf8_lossy(&eval.stdout).starts_with("k,ar\n1,"));
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn report_matches_aggregation_of_per_run_files() {
    let tmp = TempDir::new().unwrap();
    let data = gen_small(&tmp.path().join("data"), "3");
    let out = tmp.path().join("res");
    assert_eq!(code(&train(&data, &out, &["--runs", "3"])), 0);
    let original = fs::read(out.join("report.csv")).unwrap();
    let original_json = fs::read(out.join("report.json")).unwrap();
    fs::remove_file(out.join("report.csv")).unwrap();
    fs::remove_file(out.join("report.json")).unwrap();

    let o = run(&["report", "--results", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(out.join("report.csv")).unwrap(), original);
    assert_eq!(fs::read(out.join("report.json")).unwrap(), original_json);

    let mut concat = Vec::new();
    let mut pca = Vec::new();
    let mut curves: Vec<Vec<f64>> = Vec::new();
    for r in 0..3 {
        let d = out.join(format!("sigma_15/run_{r:03}"));
        let (_, metrics) = read_csv(&d.join("metrics.csv"));
        assert_eq!(metrics[0][0], "1");
        concat.push(metrics[0][1].parse::<f64>().unwrap());
        pca.push(metrics[0][2].parse::<f64>().unwrap());
        let (_, curve) = read_csv(&d.join("test_curve.csv"));
        curves.push(curve.iter().map(|row| row[1].parse().unwrap()).collect());
    }
    let report: serde_json::Value = serde_json::from_slice(&original_json).unwrap();
    let epoch = report[0]["selected_epoch"].as_u64().unwrap() as usize;
    let at_epoch: Vec<f64> = curves.iter().map(|c| c[epoch]).collect();

    let (_, rows) = read_csv(&out.join("report.csv"));
    let cell = |i: usize| rows[0][i].parse::<f64>().unwrap();
    assert!((cell(4) - mean(&concat)).abs() < 1e-12);
    assert!((cell(5) - mean(&pca)).abs() < 1e-12);
    assert!((cell(8) - mean(&at_epoch)).abs() < 1e-12);
    assert!((cell(9) - std(&at_epoch)).abs() < 1e-12);
    assert_eq!(rows[0][6], "", "no sigma=1 runs");
}

#[test]
fn report_lists_incomplete_runs() {
    let tmp = TempDir::new().unwrap();
    let data = gen_small(&tmp.path().join("data"), "4");
    let out = tmp.path().join("res");
    assert_eq!(code(&train(&data, &out, &[])), 0);
    fs::remove_file(out.join("sigma_15/run_001/trace.csv")).unwrap();
    let o = run(&["report", "--results", s(&out)]);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("run_001") && err.contains("trace.csv"),
        "{err}"
    );
}

#[test]
fn training_twice_gives_identical_reports() {
    let tmp = TempDir::new().unwrap();
    let data = gen_small(&tmp.path().join("data"), "6");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&train(&data, &a, &["--jobs", "1"])), 0);
    assert_eq!(code(&train(&data, &b, &["--jobs", "2"])), 0);
    for f in [
        "report.csv",
        "report.json",
        "sigma_15/run_001/trace.csv",
        "sigma_15/run_001/model.emb",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn reduce_writes_dataset_and_pca() {
    let tmp = TempDir::new().unwrap();
    let data = gen_small(&tmp.path().join("data"), "9");
    let out = tmp.path().join("red");
    let o = run(&[
        "reduce",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--pca-dim",
        "16",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let header = fs::read(out.join("left.emb")).unwrap();
    assert_eq!(&header[..4], b"EMB1");
    assert_eq!(u32::from_le_bytes(header[4..8].try_into().unwrap()), 200);
    assert_eq!(u32::from_le_bytes(header[8..12].try_into().unwrap()), 16);
    assert!(out.join("pca/pca_components.emb").exists());
}
