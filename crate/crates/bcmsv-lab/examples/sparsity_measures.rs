//! How the q-ratio block sparsity reads a signal: run with
//! `cargo run --example sparsity_measures`.

use bcmsv_lab::block::{BlockPartition, BlockVector, QParam};
use bcmsv_lab::Result;

fn main() -> Result<()> {
    // 12 entries in 6 blocks of length 2; three blocks carry all the energy
    let partition = BlockPartition::new(2, 6)?;
    let x = BlockVector::from_slice(
        &[3.0, 4.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0],
        partition,
    )?;

    println!("block norms: {:?}", x.block_norms());
    println!("active blocks (k_0): {}", x.q_ratio_sparsity(QParam::Zero));

    // the measure interpolates between counting and flatness as q grows:
    // k_q is scale invariant, lies in [1, p], and decreases in q
    for q in [1.5, 2.0, 4.0, 8.0] {
        let kq = x.q_ratio_sparsity(QParam::new(q)?);
        // rescaling cancels in the norm ratio, up to rounding in the powers
        let scaled = BlockVector::new(x.values() * 4.0, partition)?;
        assert!((kq - scaled.q_ratio_sparsity(QParam::new(q)?)).abs() <= 1e-12 * kq);
        println!("k_{q:<4} = {kq:.4}");
    }
    println!("k_inf  = {:.4}", x.q_ratio_sparsity(QParam::Infinity));

    // a perfectly flat signal saturates the upper end of the range
    let flat = BlockVector::from_slice(&[1.0; 12], partition)?;
    println!(
        "flat signal: k_2 = {} (equals the block count)",
        flat.q_ratio_sparsity(QParam::Finite(2.0))
    );

    // the tail after keeping the best k blocks drives the compressible bounds
    for k in [1, 2, 3] {
        println!("best {k}-block tail of x: {:.4}", x.best_block_approx_error(k)?);
    }
    Ok(())
}
