use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use cfx_core::harness::{run_demo, run_extract, run_raster, run_regions, run_trial, to_canonical_json, ScenarioConfig};
use cfx_core::QueryLedger;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cfx", version, about = "Counterfactual query oracles, model extraction and region certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured attack over all trials and check query budgets.
    Extract {
        #[arg(long)]
        config: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the query ledger of trial 0 as JSONL.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Certify Yes/No regions implied by a query ledger.
    Regions {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        /// Raster CSV destination; needs a `raster` block in the config.
        #[arg(long)]
        raster: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run trial 0 of the configured attack and rasterize its regions.
    Raster {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay the worked 2D examples.
    Demo,
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    let config = ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(config.with_env_seed()?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn raster_path(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.with_extension("raster.csv"),
        None => PathBuf::from("raster.csv"),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Extract { config, out, ledger } => {
            let config = load(&config)?;
            let mut report = run_extract(&config)?;
            if let Some(path) = &ledger {
                let (_, _, l) = run_trial(&config, 0)?;
                fs::write(path, l.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
            }
            if config.raster.is_some() {
                let regions = run_raster(&config)?;
                let path = raster_path(out.as_deref());
                if let Some(r) = &regions.raster {
                    fs::write(&path, r.to_csv()).with_context(|| format!("writing {}", path.display()))?;
                    report.rasters.push(path.display().to_string());
                }
            }
            emit(&to_canonical_json(&report)?, out.as_deref())?;
            for line in report.failures() {
                eprintln!("{line}");
            }
            Ok(report.pass)
        }
        Command::Regions { config, ledger, raster, out } => {
            let config = load(&config)?;
            let text = fs::read_to_string(&ledger).with_context(|| format!("reading {}", ledger.display()))?;
            let ledger = QueryLedger::from_jsonl(&text)?;
            let report = run_regions(&config, &ledger)?;
            if let Some(path) = &raster {
                let grid = report.raster.as_ref().context("config has no raster block")?;
                fs::write(path, grid.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            emit(&to_canonical_json(&report)?, out.as_deref())?;
            if let Some(s) = &report.sampler {
                if s.violations > 0 {
                    eprintln!("{} decided cells contradicted by sampled hyperplanes", s.violations);
                }
                if s.exhausted {
                    eprintln!("sampler accepted no proposals; cross-check skipped");
                }
            }
            Ok(report.pass)
        }
        Command::Raster { config, out } => {
            let config = load(&config)?;
            let report = run_raster(&config)?;
            let grid = report.raster.as_ref().context("config has no raster block")?;
            fs::write(&out, grid.to_csv()).with_context(|| format!("writing {}", out.display()))?;
            emit(&to_canonical_json(&report)?, None)?;
            Ok(report.pass)
        }
        Command::Demo => {
            let report = run_demo()?;
            print!("{}", report.text);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
