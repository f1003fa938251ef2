use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;
use sparse_barriers::config::ExperimentConfig;
use sparse_barriers::run::{run, Subcommand};

/// Only the thread count comes from the environment.
const THREADS_VAR: &str = "SPARSE_BARRIERS_THREADS";

#[derive(Parser, Debug)]
#[command(version, about = "Numerical experiments for Schrödinger operators with sparse potential barriers")]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// JSON experiment config.
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_all(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in files {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var(THREADS_VAR).ok().and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error in {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let out = match run(&cfg, cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{} failed: {e}", cli.command.name());
            return ExitCode::from(3);
        }
    };
    let dir = cli.out.unwrap_or_else(|| cfg.output_dir.clone());
    let meta = json!({
        "subcommand": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "files": out.tables.iter().map(|t| &t.0).collect::<Vec<_>>(),
        "summary": out.summary,
        "threads": rayon::current_num_threads(),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    let mut files = out.tables;
    files.push((format!("{}_metadata.json", cli.command.name()), serde_json::to_string_pretty(&meta).expect("metadata serializes")));
    if let Err(e) = write_all(&dir, &files) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
