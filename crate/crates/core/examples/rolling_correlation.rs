// Rolling equal-time correlation matrices of returns and |returns|, with the
// invariants every window satisfies.
//
// ```text
// cargo run --example rolling_correlation
// ```

use ising_market::coupling::{generate_coupling, CouplingSpec};
use ising_market::market::{run_simulation, ModelParams};
use ising_market::spectra::InvariantReport;
use ising_market::xcorr::{rolling_correlations, CorrelationMode, Normalization, WindowSpec};

pub fn run_example() -> Result<(), ising_market::Error> {
    let params = ModelParams {
        side: 16,
        assets: 6,
        therm_sweeps: 200,
        collect_sweeps: 1200,
        master_seed: 5,
        ..ModelParams::desk()
    };
    let gamma = generate_coupling(&CouplingSpec {
        density: 0.5,
        mean: 0.5,
        ..CouplingSpec::new(params.assets, 5)
    });
    let panel = run_simulation(&params, &gamma)?;

    for mode in [CorrelationMode::Return, CorrelationMode::AbsoluteReturn] {
        let spec = WindowSpec {
            stride: 200,
            ..WindowSpec::new(300, mode)
        };
        let series = rolling_correlations(&panel, &spec)?;
        println!("{mode:?}: {} windows", series.matrices.len());
        for c in &series.matrices {
            let n = c.n() as f64;
            let mean_off = (c.entries().iter().sum::<f64>() - n) / (n * n - n);
            let report = InvariantReport::of(c)?;
            println!(
                "  end {:>5}: mean off-diagonal {mean_off:+.4}, min eigenvalue {:.3}, invariants hold: {}",
                c.window_end,
                report.min_eigenvalue,
                report.holds(c.n())
            );
        }
    }

    let global = WindowSpec {
        normalization: Normalization::Global,
        ..WindowSpec::new(300, CorrelationMode::Return)
    };
    let g = rolling_correlations(&panel, &global)?;
    println!("global normalization, first window C[0][1] = {:+.4}", g.matrices[0].get(0, 1));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), ising_market::Error> {
    run_example()
}
