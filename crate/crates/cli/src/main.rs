use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pinncond_cli::commands::{cmd_condnum, cmd_hardbc, cmd_spectrum, cmd_train};
use pinncond_cli::config::ExperimentConfig;
use pinncond_cli::output::write_json;
use pinncond_cli::verify::{run_all, VerifyOptions};

#[derive(Parser)]
#[command(name = "pinncond", about = "Conditioning experiments for physics-informed models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file; defaults to the command's standard scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent sweep configurations.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Condition numbers over the swept parameter.
    Condnum,
    /// Gradient-descent runs with and without preconditioning.
    Train,
    /// Soft versus hard boundary constraints.
    Hardbc,
    /// Normalised spectra of network and Fourier models.
    Spectrum,
    /// Run the acceptance suite.
    Verify {
        /// Make the listed criteria fail on purpose (harness self-test).
        #[arg(long, value_delimiter = ',')]
        perturb: Vec<u32>,
        /// Run only the listed criteria.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
    },
}

fn default_scenario(c: &Command) -> &'static str {
    match c {
        Command::Hardbc => "hardbc-toy",
        Command::Spectrum => "spectrum-poisson",
        _ => "poisson-fourier",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => ExperimentConfig::preset(default_scenario(&cli.command)),
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let jobs = cli.jobs.max(1);
    let result = match &cli.command {
        Command::Condnum => cmd_condnum(&cfg, &out, jobs).map(|_| true),
        Command::Train => cmd_train(&cfg, &out, jobs).map(|_| true),
        Command::Hardbc => cmd_hardbc(&cfg, &out, jobs).map(|_| true),
        Command::Spectrum => cmd_spectrum(&cfg, &out, jobs).map(|_| true),
        Command::Verify { perturb, criteria } => {
            let report = run_all(&VerifyOptions { perturb: perturb.clone(), only: criteria.clone() });
            for c in &report.criteria {
                println!("{}", c.summary_line());
            }
            std::fs::create_dir_all(&out)
                .map_err(anyhow::Error::from)
                .and_then(|_| write_json(&out.join("verify_report.json"), &report))
                .map(|_| report.passed)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
