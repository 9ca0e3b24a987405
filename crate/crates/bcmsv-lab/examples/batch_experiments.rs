//! Driving the batch grids from code instead of the command line: run with
//! `cargo run --example batch_experiments`. The same runners back the
//! `bcmsv-lab` binary; shrunken grids keep this example quick.

use bcmsv_lab::block::QParam;
use bcmsv_lab::experiments::{
    run_table2, run_trend_m, EnsembleKind, Table2Config, TrendMConfig,
};
use bcmsv_lab::Result;

fn main() -> Result<()> {
    // a one-column slice of the BCMSV table
    let table2 = run_table2(&Table2Config {
        big_n: 32,
        block_lens: vec![1],
        ms: vec![20, 26],
        qs: vec![QParam::Finite(2.0)],
        ss: vec![2.0, 4.0],
        restarts: 10,
        seed: 7,
        ..Table2Config::default()
    })?;
    print!("{}", table2.csv);
    for row in &table2.rows {
        assert!(row.beta > 0.0);
    }

    // growth of the estimate with the number of measurements
    let trend = run_trend_m(&TrendMConfig {
        ensemble: EnsembleKind::Bernoulli,
        big_n: 32,
        n: 1,
        q: QParam::Finite(2.0),
        s: 4.0,
        ms: vec![12, 24],
        seeds_per_m: 3,
        restarts: 10,
        seed: 7,
        ..TrendMConfig::default()
    })?;
    print!("{}", trend.csv);
    assert!(trend.rows[1].mean_beta >= trend.rows[0].mean_beta - 5e-3);

    println!("rerunning either grid with the same seed reproduces the bytes above");
    Ok(())
}
