// Config-driven end-to-end run: coupling, simulation, statistics and
// spectra written to an output directory with a manifest.
//
// ```text
// cargo run --release --example pipeline -- [config.toml] [out_dir]
// ```

use std::path::{Path, PathBuf};

use ising_market::config::{ExperimentConfig, Preset};
use ising_market::pipeline::{cmd_pipeline, with_threads};

const SMALL: &str = "
[model]
side = 12
assets = 5
therm_sweeps = 100
collect_sweeps = 1000
[window]
length = 200
[analysis]
max_lag = 100
";

pub fn run_example_in(config: Option<&Path>, out: &Path) -> Result<(), ising_market::Error> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(Preset::Desk, path)?,
        None => {
            let mut c = ExperimentConfig::desk();
            c.apply_toml(SMALL, Path::new("."))?;
            c
        }
    };
    cfg.output.dir = out.to_path_buf();
    cfg.validate()?;
    let (manifest, result) = with_threads(cfg.threads, || cmd_pipeline(&cfg));
    manifest.write(out)?;
    result?;
    println!("config hash {}", manifest.config_hash);
    for stage in &manifest.stages {
        println!("{:<18} {:>6.2}s  {} files", stage.stage, stage.seconds, stage.files.len());
    }
    println!("outputs in {}", out.display());
    Ok(())
}

pub fn run_example() -> Result<(), ising_market::Error> {
    let dir = std::env::temp_dir().join(format!("ising-market-example-{}", std::process::id()));
    let result = run_example_in(None, &dir);
    let _ = std::fs::remove_dir_all(&dir);
    result
}

#[allow(dead_code)]
fn main() -> Result<(), ising_market::Error> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from);
    let out = args.next().map_or_else(|| PathBuf::from("out"), PathBuf::from);
    run_example_in(config.as_deref(), &out)
}
