// Eigenvalue trajectory of the rolling correlation matrix: cumulative risk
// fraction of the top modes, eigenvector localization (IPR), and how both
// track the volatility index.
//
// ```text
// cargo run --release --example spectral_risk
// ```

use ising_market::config::ExperimentConfig;
use ising_market::coupling::generate_coupling;
use ising_market::market::run_simulation;
use ising_market::pipeline::{spectra_for_panel, window_volatility};
use ising_market::series::spearman;

pub fn run_example_with(collect: usize) -> Result<(), ising_market::Error> {
    let mut cfg = ExperimentConfig::desk();
    cfg.model.side = 16;
    cfg.model.assets = 10;
    cfg.model.therm_sweeps = 200;
    cfg.model.collect_sweeps = collect;
    cfg.validate()?;
    let gamma = generate_coupling(&cfg.coupling_spec().expect("generated coupling"));
    let panel = run_simulation(&cfg.model, &gamma)?;

    let results = spectra_for_panel(&panel, &cfg)?;
    let (_, ret) = &results[0];
    let (_, abs) = &results[1];
    let ends: Vec<usize> = ret.summaries.iter().map(|s| s.window_end).collect();
    let vol = window_volatility(&panel, cfg.window.length, &ends);

    if let Some(mp) = &ret.mp {
        println!("random-matrix band for Q={:.1}: [{:.3}, {:.3}]", mp.q, mp.lambda_minus, mp.lambda_plus);
    }
    println!("window_end  I_mean   lambda_1  CRF_1  CRF_5  IPR_1(abs)");
    for ((r, a), v) in ret.summaries.iter().zip(&abs.summaries).zip(&vol) {
        println!(
            "{:>10}  {v:.5}  {:>8.3}  {:.3}  {:.3}  {:.3}",
            r.window_end,
            r.eigenvalues()[0],
            r.crf[0],
            r.crf[4],
            a.ipr[0]
        );
    }
    let crf1: Vec<f64> = ret.summaries.iter().map(|s| s.crf[0]).collect();
    let ipr1: Vec<f64> = abs.summaries.iter().map(|s| s.ipr[0]).collect();
    println!(
        "rank correlation with volatility: CRF_1 {:+.3}, |return| IPR_1 {:+.3}",
        spearman(&vol, &crf1),
        spearman(&vol, &ipr1)
    );
    Ok(())
}

pub fn run_example() -> Result<(), ising_market::Error> {
    run_example_with(2000)
}

#[allow(dead_code)]
fn main() -> Result<(), ising_market::Error> {
    run_example_with(10_000)
}
