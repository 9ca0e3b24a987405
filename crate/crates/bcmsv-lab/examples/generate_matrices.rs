//! The three seeded measurement ensembles and their CSV round trip: run with
//! `cargo run --example generate_matrices`.

use bcmsv_lab::ensembles::{
    gen_bernoulli, gen_gaussian, gen_hadamard_submatrix, MeasurementMatrix,
};
use bcmsv_lab::Result;

fn column_norm_range(matrix: &MeasurementMatrix) -> (f64, f64) {
    let a = matrix.entries();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for j in 0..a.ncols() {
        let norm = a.column(j).norm();
        lo = lo.min(norm);
        hi = hi.max(norm);
    }
    (lo, hi)
}

fn main() -> Result<()> {
    let (m, big_n, seed) = (24, 64, 7);

    let gaussian = gen_gaussian(m, big_n, seed, false)?;
    let unit = gen_gaussian(m, big_n, seed, true)?;
    let bernoulli = gen_bernoulli(m, big_n, seed)?;
    let hadamard = gen_hadamard_submatrix(m, big_n, seed)?;

    for matrix in [&gaussian, &unit, &bernoulli, &hadamard] {
        let (lo, hi) = column_norm_range(matrix);
        println!(
            "{:<14} {}x{}  column norms in [{lo:.4}, {hi:.4}]",
            matrix.ensemble_label(),
            matrix.num_rows(),
            matrix.num_cols()
        );
    }

    // Bernoulli entries are +-1/sqrt(m), so its columns are exactly unit;
    // Hadamard rows come from a randomly permuted orthogonal matrix
    let same_seed = gen_bernoulli(m, big_n, seed)?;
    assert_eq!(bernoulli.entries(), same_seed.entries());
    println!("same seed reproduces the same draw");

    let csv = bernoulli.to_csv();
    let back = MeasurementMatrix::from_csv(&csv)?;
    assert_eq!(bernoulli.entries(), back.entries());
    println!(
        "CSV round trip is exact ({} bytes, header \"{}\")",
        csv.len(),
        csv.lines().next().unwrap_or_default()
    );
    Ok(())
}
