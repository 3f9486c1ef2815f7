// Generates a sparse cross-asset coupling matrix, checks it, and round-trips
// it through both text formats.
//
// ```text
// cargo run --example coupling_matrix
// ```

use ising_market::coupling::{generate_coupling, validate_coupling, CouplingMatrix, CouplingSpec};

pub fn run_example() -> Result<(), ising_market::Error> {
    let spec = CouplingSpec::new(300, 7);
    let gamma = generate_coupling(&spec);
    let diag = validate_coupling(&gamma);
    println!(
        "n={} nonzero={} (target {}) min={:?} max={:?} mean={:?}",
        diag.n,
        diag.nonzero,
        spec.nonzero_target(),
        diag.min,
        diag.max,
        diag.mean
    );
    println!("symmetric={} zero diagonal={}", diag.symmetric, diag.diagonal_zero);

    let sparse = gamma.to_sparse_text();
    let back = CouplingMatrix::from_sparse_text(&sparse)?;
    assert_eq!(back, gamma);
    let dense = CouplingMatrix::from_dense_csv(&gamma.to_dense_csv())?;
    assert_eq!(dense, gamma);
    println!("sparse text: {} bytes, round-trips exactly", sparse.len());

    let sym = gamma.symmetrized();
    println!("symmetrized nonzero={}", sym.nonzero_count());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), ising_market::Error> {
    run_example()
}
