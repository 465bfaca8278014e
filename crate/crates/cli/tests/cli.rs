//! End-to-end runs of the binary on small configurations.

use std::path::Path;
use std::process::{Command, Output};

fn pinncond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinncond")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn run_ok(args: &[&str]) {
    let o = pinncond(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn condnum_single_point_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"poisson-fourier\"\n[problem]\nk_list = [4]\n");
    let out = dir.path().join("out");
    run_ok(&["condnum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let (header, rows) = read_csv(&out.join("condnum.csv"));
    assert_eq!(header, ["param", "lambda_star", "kappa_raw", "kappa_precond"]);
    assert_eq!(rows.len(), 1);
    let kappa: f64 = rows[0][2].parse().unwrap();
    assert!(kappa >= 256.0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("condnum_report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn output_is_byte_identical_across_runs_and_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario = \"poisson-fourier\"\n[problem]\nk_list = [2, 4, 8]\nassembly = \"quadrature\"\n[train]\nsteps = 20\n",
    );
    let outs: Vec<_> = ["1", "3"].iter().map(|j| dir.path().join(format!("out{j}"))).collect();
    for (j, out) in ["1", "3"].iter().zip(&outs) {
        run_ok(&["condnum", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", j, "--seed", "5"]);
        run_ok(&["train", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", j, "--seed", "5"]);
    }
    for name in ["condnum.csv", "train_000_raw.csv", "train_002_precond.csv"] {
        let a = std::fs::read(outs[0].join(name)).unwrap();
        let b = std::fs::read(outs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let (_, summary) = read_csv(&outs[0].join("train_summary.csv"));
    let order: Vec<(&str, &str)> = summary.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(order.len(), 6);
    assert!(order[0].1 == "raw" && order[1].1 == "precond");
    assert!(order[0].0.parse::<f64>().unwrap() < order[2].0.parse::<f64>().unwrap());
}

#[test]
fn zero_step_run_records_only_the_initial_loss() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario = \"poisson-fourier\"\n[problem]\nk_list = [4]\nassembly = \"quadrature\"\n[train]\nsteps = 0\nvariants = [\"raw\"]\n",
    );
    let out = dir.path().join("out");
    run_ok(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let (header, rows) = read_csv(&out.join("train_000_raw.csv"));
    assert_eq!(header, ["step", "loss", "mse", "eps_norm", "dist_to_star"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "0");
    assert!(rows[0][1].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn hardbc_reports_the_toy_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&["hardbc", "--out", out.to_str().unwrap()]);
    let (header, rows) = read_csv(&out.join("hardbc_toy.csv"));
    assert_eq!(header, ["variant", "kappa"]);
    let want = [3.0 + 2.0 * 2f64.sqrt(), 4.0, 1.0];
    for (r, w) in rows.iter().zip(want) {
        assert!((r[1].parse::<f64>().unwrap() - w).abs() < 1e-6, "{r:?}");
    }
    let (header, rows) = read_csv(&out.join("hardbc_advection.csv"));
    assert_eq!(header, ["beta", "lambda", "kappa_soft", "kappa_hard"]);
    assert_eq!(rows.len(), 4 * 9);
}

#[test]
fn spectrum_histograms_cover_three_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"spectrum-poisson\"\n[model]\nhidden = [16, 16]\nff_k = 4\n[grid]\nn_x = 64\n");
    let out = dir.path().join("out");
    run_ok(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let (header, rows) = read_csv(&out.join("spectrum.csv"));
    assert_eq!(header, ["bin_lo", "bin_hi", "count", "model"]);
    for m in ["mlp", "fourier_precond", "ff_mlp"] {
        assert_eq!(rows.iter().filter(|r| r[3] == m).count(), 50);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let bad = write_config(dir.path(), "scenario = \"poisson-fourier\"\n[problem]\nk_list = []\n");
    assert_eq!(pinncond(&["condnum", "--config", &bad, "--out", out]).status.code(), Some(2));
    assert_eq!(pinncond(&["condnum", "--config", "/nonexistent.toml", "--out", out]).status.code(), Some(2));
    let o = pinncond(&["verify", "--criteria", "3,9", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = pinncond(&["verify", "--criteria", "9", "--perturb", "9", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(out).join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert!(report["criteria"][0]["runtime_seconds"].as_f64().unwrap() >= 0.0);
    assert!(report["criteria"][0]["checks"][0]["margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn preconditioned_fourier_spectrum_clusters_around_its_median() {
    let mut cfg = pinncond_cli::config::ExperimentConfig::preset("spectrum-poisson").unwrap();
    cfg.model.hidden = vec![8];
    cfg.grid.n_x = 32;
    let s = pinncond_cli::experiments::spectra(&cfg).unwrap();
    let f = s.iter().find(|r| r.model == "fourier_precond").unwrap();
    let median = f.eigenvalues[f.eigenvalues.len() / 2];
    assert!(f.eigenvalues.iter().all(|&e| e >= 0.5 * median && e <= 1.5 * median), "{:?}", f.eigenvalues);
}
