// Return-distribution and autocorrelation statistics of a simulated panel:
// kurtosis, ACF of returns and of |returns|, integrated autocorrelation
// times and the volatility index.
//
// ```text
// cargo run --release --example stylized_facts [side]
// ```

use ising_market::coupling::{generate_coupling, CouplingSpec};
use ising_market::market::{run_simulation, ModelParams};
use ising_market::series::{self, HistogramSpec};

pub fn run_example_with(side: usize) -> Result<(), ising_market::Error> {
    let params = ModelParams {
        side,
        assets: 4,
        therm_sweeps: 500,
        collect_sweeps: 5000,
        master_seed: 3,
        ..ModelParams::desk()
    };
    let gamma = generate_coupling(&CouplingSpec::new(params.assets, 3));
    let panel = run_simulation(&params, &gamma)?;

    let z = series::normalize_returns(&panel)?;
    let pooled = &series::distribution_stats(&z, true, HistogramSpec::default())?[0];
    println!("L={side}: pooled kurtosis {:.2}, skewness {:+.3}", pooled.kurtosis, pooled.skewness);

    let band = 1.96 / (panel.len() as f64).sqrt();
    let r = panel.row(0);
    let abs: Vec<f64> = r.iter().map(|x| x.abs()).collect();
    let acf_r = series::acf(r, 50)?;
    let acf_a = series::acf(&abs, 50)?;
    println!("asset 0 ACF (noise band +/-{band:.4}):");
    for lag in [1, 2, 5, 10, 20, 50] {
        println!("  lag {lag:>2}: return {:+.4}   |return| {:+.4}", acf_r.rho[lag], acf_a.rho[lag]);
    }
    let tau_r = series::integrated_autocorr_time(r, 5.0)?;
    let tau_a = series::integrated_autocorr_time(&abs, 5.0)?;
    println!("tau_int: return {:.2} +/- {:.2}, |return| {:.2} +/- {:.2}", tau_r.tau, tau_r.error, tau_a.tau, tau_a.error);

    let vi = series::volatility_index(&panel);
    let chunk = vi.len() / 10;
    let means: Vec<String> = vi.chunks(chunk).map(|c| format!("{:.4}", series::mean(c))).collect();
    println!("volatility index, mean per tenth of the run: {}", means.join(" "));
    Ok(())
}

pub fn run_example() -> Result<(), ising_market::Error> {
    run_example_with(32)
}

#[allow(dead_code)]
fn main() -> Result<(), ising_market::Error> {
    let side = std::env::args().nth(1).map_or(48, |s| s.parse().expect("side must be an integer"));
    run_example_with(side)
}
