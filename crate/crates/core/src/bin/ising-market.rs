use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ising_market::config::{ExperimentConfig, Preset};
use ising_market::pipeline::{self, RunManifest, StageReport};
use ising_market::Error;

#[derive(Parser)]
#[command(name = "ising-market", version, about = "Multi-asset spin market simulator and analysis")]
struct Cli {
    /// TOML file layered over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `paper` is the full-scale setup; `desk` runs in minutes.
    #[arg(long, global = true, value_enum, default_value = "paper")]
    preset: Preset,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the cross-asset coupling matrix and its diagnostics.
    GenerateCoupling,
    /// Run the spin market and write the return panel.
    Simulate,
    /// Distribution, autocorrelation and volatility statistics of a panel.
    Analyze {
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Rolling cross-correlation matrices for both return modes.
    Xcorr {
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Eigenvalue, CRF and IPR trajectories of the rolling correlations.
    Spectra {
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Shuffle each asset's returns in time first (null model).
        #[arg(long)]
        shuffle_seed: Option<u64>,
    },
    /// generate-coupling, simulate, analyze and spectra in one run.
    Pipeline,
    /// Check the configuration and exit.
    Validate,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(cli.preset, path)?,
        None => ExperimentConfig::preset(cli.preset),
    };
    if let Some(seed) = cli.seed {
        cfg.model.master_seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn record(cfg: &ExperimentConfig, report: StageReport) -> Result<(), Error> {
    let mut manifest = RunManifest::read(&cfg.output.dir)
        .ok()
        .filter(|m| m.config_hash == cfg.hash())
        .unwrap_or_else(|| RunManifest::new(cfg));
    manifest.stages.retain(|s| s.stage != report.stage);
    manifest.stages.push(report);
    manifest.write(&cfg.output.dir)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = load_config(&cli)?;
    let panel_or_default = |p: &Option<PathBuf>| p.clone().unwrap_or_else(|| pipeline::default_panel_path(&cfg));
    pipeline::with_threads(cfg.threads, || {
        let report = match &cli.command {
            Command::Validate => {
                println!("ok {}", cfg.hash());
                return Ok(());
            }
            Command::Pipeline => {
                let (manifest, result) = pipeline::cmd_pipeline(&cfg);
                manifest.write(&cfg.output.dir)?;
                return result;
            }
            Command::GenerateCoupling => pipeline::cmd_generate_coupling(&cfg)?,
            Command::Simulate => pipeline::cmd_simulate(&cfg)?,
            Command::Analyze { panel } => pipeline::cmd_analyze(&cfg, &panel_or_default(panel))?,
            Command::Xcorr { panel } => pipeline::cmd_xcorr(&cfg, &panel_or_default(panel))?,
            Command::Spectra { panel, shuffle_seed } => {
                pipeline::cmd_spectra(&cfg, &panel_or_default(panel), *shuffle_seed)?
            }
        };
        record(&cfg, report)
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
