// Random-matrix references: Marchenko-Pastur edges and density, IPR of
// random unit vectors, and the spectrum of a time-shuffled panel.
//
// ```text
// cargo run --release --example random_matrix_baselines
// ```

use ising_market::panel::Panel;
use ising_market::series::shuffle_in_time;
use ising_market::spectra::{ipr, ipr6, mp_reference, spectral_trajectory};
use ising_market::xcorr::{rolling_correlations, CorrelationMode, WindowSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn run_example() -> Result<(), ising_market::Error> {
    let mp = mp_reference(400, 300)?;
    println!("T=400, N=300: Q={:.4}, lambda- {:.5}, lambda+ {:.4}", mp.q, mp.lambda_minus, mp.lambda_plus);
    for (l, rho) in mp.sample(6) {
        println!("  rho({l:.3}) = {rho:.4}");
    }

    let n = 300;
    let draws = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut s4, mut s6) = (0.0, 0.0);
    for _ in 0..draws {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
        s4 += ipr(&v)?;
        s6 += ipr6(&v)?;
    }
    println!(
        "random unit vectors, N={n}: mean IPR {:.5} (3/N = {:.5}), mean IPR6 {:.3e} (15/N^2 = {:.3e})",
        s4 / draws as f64,
        3.0 / n as f64,
        s6 / draws as f64,
        15.0 / (n * n) as f64
    );

    // A panel with one strong common factor, then the same panel shuffled.
    let (assets, len, window) = (30, 3000, 300);
    let common: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let rows = (0..assets)
        .map(|_| common.iter().map(|c| 0.6 * c + rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let panel = Panel::from_rows(rows).expect("rectangular");
    let shuffled = shuffle_in_time(&panel, 9);
    for (name, p) in [("common factor", &panel), ("time-shuffled", &shuffled)] {
        let series = rolling_correlations(p, &WindowSpec::new(window, CorrelationMode::Return))?;
        let traj = spectral_trajectory(&series.matrices, 1, window)?;
        let top: Vec<f64> = traj.summaries.iter().map(|s| s.eigenvalues()[0]).collect();
        let mean = top.iter().sum::<f64>() / top.len() as f64;
        let band = traj.mp.expect("window longer than asset count");
        println!(
            "{name}: mean lambda_1 {mean:.3} vs random band edge {:.3}",
            band.lambda_plus
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), ising_market::Error> {
    run_example()
}
