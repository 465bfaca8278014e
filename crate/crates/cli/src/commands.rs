//! Subcommands: each runs a sweep, writes its files under `out` and returns
//! the merged report.

use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use pinncond::linalg::spectral_histogram;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Variant};
use crate::experiments::{condnum_point, hardbc_advection, hardbc_toy, spectra, train_point, RunStatus};
use crate::output::{fmt_f64, fmt_opt, write_csv, ReportRow, RunReport};

/// Boundary weights of the hard-versus-soft advection curves.
pub const HARDBC_LAMBDAS: [f64; 9] = [1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6];

/// Golden-section tolerance for the toy table, tight enough for six digits.
pub const TOY_TOL: f64 = 1e-10;

/// Runs `f` over the items on a pool of `jobs` threads, keeping input order.
fn sweep<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> anyhow::Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

fn create_dir(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

pub fn cmd_condnum(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> anyhow::Result<RunReport> {
    create_dir(out)?;
    let params = cfg.sweep();
    let results = sweep(jobs, &params, |&p| {
        let t = Instant::now();
        (condnum_point(cfg, p), t.elapsed().as_secs_f64())
    })?;
    let mut csv_rows = Vec::new();
    let mut rows = Vec::new();
    for (&p, (r, secs)) in params.iter().zip(results) {
        let r = r.with_context(|| format!("condition number at parameter {p}"))?;
        csv_rows.push(vec![fmt_f64(r.param), fmt_f64(r.lambda_star), fmt_f64(r.kappa_raw), fmt_f64(r.kappa_precond)]);
        rows.push(ReportRow {
            param: p,
            kappa: Some(r.kappa_raw),
            lambda_star: Some(r.lambda_star),
            wall_seconds: secs,
            status: "ok".into(),
            ..Default::default()
        });
    }
    write_csv(&out.join("condnum.csv"), &["param", "lambda_star", "kappa_raw", "kappa_precond"], &csv_rows)?;
    let report = RunReport::new("condnum", &cfg.scenario, rows);
    report.write(&out.join("condnum_report.json"))?;
    Ok(report)
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Raw => "raw",
        Variant::Precond => "precond",
        Variant::Inverse => "inverse",
    }
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> anyhow::Result<RunReport> {
    create_dir(out)?;
    let runs: Vec<(usize, f64, Variant)> = cfg
        .sweep()
        .into_iter()
        .enumerate()
        .flat_map(|(i, p)| cfg.train.variants.iter().map(move |&v| (i, p, v)))
        .collect();
    let results = sweep(jobs, &runs, |&(i, p, v)| -> anyhow::Result<ReportRow> {
        let o = train_point(cfg, p, v).with_context(|| format!("training at parameter {p}"))?;
        let tr = &o.trajectory;
        let at = |v: &[f64], k: usize| fmt_opt(v.get(k).copied());
        let rows: Vec<Vec<String>> = (0..tr.losses.len())
            .map(|k| vec![k.to_string(), at(&tr.losses, k), at(&tr.mses, k), at(&tr.eps_norms, k), at(&tr.dists, k)])
            .collect();
        let name = format!("train_{i:03}_{}.csv", variant_name(v));
        write_csv(&out.join(name), &["step", "loss", "mse", "eps_norm", "dist_to_star"], &rows)?;
        let status = match &o.status {
            RunStatus::Ok => "ok".to_string(),
            RunStatus::Diverged { step } => format!("diverged at step {step}"),
            RunStatus::Failed(e) => format!("failed: {e}"),
        };
        Ok(ReportRow {
            param: p,
            variant: Some(variant_name(v).into()),
            kappa: o.kappa,
            lambda_star: Some(o.lambda),
            final_loss: tr.losses.last().copied(),
            final_mse: tr.mses.last().copied(),
            rate: o.rate,
            wall_seconds: o.wall_seconds,
            status,
        })
    })?;
    let rows = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    let summary: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.param),
                r.variant.clone().unwrap_or_default(),
                fmt_opt(r.lambda_star),
                fmt_opt(r.kappa),
                fmt_opt(r.final_loss),
                fmt_opt(r.final_mse),
                fmt_opt(r.rate),
                r.status.clone(),
            ]
        })
        .collect();
    write_csv(
        &out.join("train_summary.csv"),
        &["param", "variant", "lambda", "kappa", "final_loss", "final_mse", "rate", "status"],
        &summary,
    )?;
    let report = RunReport::new("train", &cfg.scenario, rows);
    report.write(&out.join("train_report.json"))?;
    Ok(report)
}

pub fn cmd_hardbc(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> anyhow::Result<RunReport> {
    create_dir(out)?;
    let t = Instant::now();
    let toy = hardbc_toy(TOY_TOL)?;
    let toy_secs = t.elapsed().as_secs_f64();
    write_csv(
        &out.join("hardbc_toy.csv"),
        &["variant", "kappa"],
        &[
            vec!["soft".into(), fmt_f64(toy.soft)],
            vec!["multiplicative".into(), fmt_f64(toy.multiplicative)],
            vec!["subtractive".into(), fmt_f64(toy.subtractive)],
        ],
    )?;
    let mut rows: Vec<ReportRow> = [("soft", toy.soft, Some(toy.soft_lambda_star)), ("multiplicative", toy.multiplicative, None), ("subtractive", toy.subtractive, None)]
        .into_iter()
        .map(|(name, k, l)| ReportRow {
            param: 0.0,
            variant: Some(format!("toy_{name}")),
            kappa: Some(k),
            lambda_star: l,
            wall_seconds: toy_secs,
            status: "ok".into(),
            ..Default::default()
        })
        .collect();

    let (kx, kt) = (cfg.problem.k_list[0], cfg.model.kt);
    let betas = cfg.problem.beta_list.clone();
    let curves = sweep(jobs, &betas, |&b| {
        let t = Instant::now();
        (hardbc_advection(kx, kt, b, &HARDBC_LAMBDAS), t.elapsed().as_secs_f64())
    })?;
    let mut csv_rows = Vec::new();
    for (&b, (c, secs)) in betas.iter().zip(curves) {
        let c = c.with_context(|| format!("hard-constraint curve at beta {b}"))?;
        for r in &c {
            csv_rows.push(vec![fmt_f64(r.beta), fmt_f64(r.lambda), fmt_f64(r.kappa_soft), fmt_f64(r.kappa_hard)]);
        }
        rows.push(ReportRow {
            param: b,
            variant: Some("advection_hard".into()),
            kappa: c.first().map(|r| r.kappa_hard),
            wall_seconds: secs,
            status: "ok".into(),
            ..Default::default()
        });
    }
    write_csv(&out.join("hardbc_advection.csv"), &["beta", "lambda", "kappa_soft", "kappa_hard"], &csv_rows)?;
    let report = RunReport::new("hardbc", &cfg.scenario, rows);
    report.write(&out.join("hardbc_report.json"))?;
    Ok(report)
}

pub fn cmd_spectrum(cfg: &ExperimentConfig, out: &Path, _jobs: usize) -> anyhow::Result<RunReport> {
    create_dir(out)?;
    let t = Instant::now();
    let spectra = spectra(cfg)?;
    let secs = t.elapsed().as_secs_f64();
    let mut csv_rows = Vec::new();
    let mut rows = Vec::new();
    for s in &spectra {
        let h = spectral_histogram(&s.eigenvalues, cfg.spectrum.bins)?;
        for (i, c) in h.counts.iter().enumerate() {
            csv_rows.push(vec![fmt_f64(h.edges[i]), fmt_f64(h.edges[i + 1]), c.to_string(), s.model.to_string()]);
        }
        let below = s.count_below(cfg.spectrum.threshold);
        rows.push(ReportRow {
            param: s.n_params as f64,
            variant: Some(s.model.into()),
            kappa: Some(s.top() / s.eigenvalues[0].abs()),
            wall_seconds: secs,
            status: format!("{below} of {} eigenvalues at most {:e} of the largest", s.eigenvalues.len(), cfg.spectrum.threshold),
            ..Default::default()
        });
    }
    write_csv(&out.join("spectrum.csv"), &["bin_lo", "bin_hi", "count", "model"], &csv_rows)?;
    let report = RunReport::new("spectrum", &cfg.scenario, rows);
    report.write(&out.join("spectrum_report.json"))?;
    Ok(report)
}
