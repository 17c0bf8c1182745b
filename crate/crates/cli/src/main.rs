use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use dualdet_cli::{config, exit, exit_code, report, ExperimentConfig, Format, Kind};

/// Worker-count override for the rayon pool.
const THREADS_ENV: &str = "DUALDET_THREADS";

#[derive(Parser)]
#[command(name = "dualdet", version, about = "Duality, contour moments and Fredholm determinants for q-TASEP and ASEP")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; the file is named after the experiment.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| config::ConfigError::new(THREADS_ENV, format!("not a thread count: {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building the worker pool")?;
    }
    Ok(())
}

fn output_path(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    let file = format!("{}.{}", cfg.kind, cli.format.extension());
    match (&cli.out, &cfg.output) {
        (Some(dir), _) => dir.join(file),
        (None, Some(p)) => p.clone(),
        (None, None) => PathBuf::from(file),
    }
}

fn run(cli: &Cli) -> Result<u8> {
    init_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => config::parse_config_for(path, Some(cli.kind))?,
        None => ExperimentConfig::defaults(cli.kind),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let rep = dualdet_cli::run_experiment(&cfg).with_context(|| format!("{} failed", cfg.kind))?;
    let path = output_path(cli, &cfg);
    report::emit_report(&rep, cli.format, &path)?;
    for c in &rep.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {} value={:e} tolerance={:e}", c.name, c.value, c.tolerance);
    }
    println!("wrote {} ({} rows)", path.display(), rep.rows.len());
    Ok(if rep.all_pass() { exit::SUCCESS } else { exit::TOLERANCE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
