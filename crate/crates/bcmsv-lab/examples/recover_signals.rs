//! Solving the three recovery programs on one noisy instance: run with
//! `cargo run --example recover_signals`.

use bcmsv_lab::block::{BlockPartition, BlockVector, QParam};
use bcmsv_lab::ensembles::gen_gaussian;
use bcmsv_lab::rng::rng_from_seed;
use bcmsv_lab::solvers::{solve_recovery, RecoveryProblem, RecoveryProgram, SolveOptions};
use bcmsv_lab::Result;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<()> {
    let (m, big_n, n, k) = (48, 64, 2, 2);
    let matrix = gen_gaussian(m, big_n, 11, false)?;
    let partition = BlockPartition::from_total(big_n, n)?;
    let mut rng = rng_from_seed(4);

    // truth with k active blocks and 2% Gaussian measurement noise
    let mut values = DVector::zeros(big_n);
    for b in [5, 20] {
        for i in partition.block_range(b) {
            values[i] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let x = BlockVector::new(values, partition)?;
    let eps = DVector::from_fn(m, |_, _| 0.02 * rng.sample::<f64, _>(StandardNormal));
    let y = matrix.entries() * x.values() + &eps;

    // calibrate each program so the truth is feasible for it
    let at_eps = BlockVector::new(matrix.entries().transpose() * &eps, partition)?;
    let mu = at_eps.mixed_norm(QParam::Infinity);
    let programs = [
        RecoveryProgram::Bbp { zeta: eps.norm() },
        RecoveryProgram::Bds { mu },
        RecoveryProgram::GroupLasso { mu: 2.0 * mu },
    ];

    let opts = SolveOptions::default();
    for program in programs {
        let problem = RecoveryProblem::new(&matrix, partition, y.clone(), program)?;
        let result = solve_recovery(&problem, &opts)?;
        let h = BlockVector::new(result.x_hat.values() - x.values(), partition)?;
        println!(
            "{program:?}\n  |x_hat - x|_2,2 = {:.4}  objective = {:.4}  feasibility = {:.2e}  iters = {} converged = {}",
            h.mixed_norm(QParam::Finite(2.0)),
            result.objective,
            result.primal_feasibility,
            result.iterations,
            result.converged,
        );
        assert!(result.converged);
        // recovered supports concentrate on the true active blocks
        let norms = result.x_hat.block_norms();
        let mut order: Vec<usize> = (0..norms.len()).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        println!("  heaviest blocks: {:?} (truth: [5, 20])", &order[..k]);
    }
    Ok(())
}
