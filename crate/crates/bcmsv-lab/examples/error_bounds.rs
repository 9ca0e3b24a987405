//! Evaluating a computable recovery error bound end to end: run with
//! `cargo run --example error_bounds`.

use bcmsv_lab::bcmsv::{estimate_bcmsv, BcmsvOptions, BcmsvProblem};
use bcmsv_lab::block::{BlockPartition, BlockVector, QParam};
use bcmsv_lab::bounds::{theorem1_bounds, theorem1_scale, BoundInput, ProgramKind};
use bcmsv_lab::ensembles::gen_gaussian;
use bcmsv_lab::rng::rng_from_seed;
use bcmsv_lab::solvers::{
    residual_cone_check, solve_recovery, ConeProgram, RecoveryProblem, RecoveryProgram,
    SolveOptions,
};
use bcmsv_lab::Result;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<()> {
    let (m, big_n, n, k) = (48, 64, 2, 2);
    let q = QParam::Finite(2.0);
    let matrix = gen_gaussian(m, big_n, 21, false)?;
    let partition = BlockPartition::from_total(big_n, n)?;

    // the bound needs beta at the program's own sparsity scale, computable
    // before anything is solved
    let scale = theorem1_scale(k, q, ProgramKind::Bbp, None)?;
    let problem = BcmsvProblem::new(&matrix, partition, q, scale)?;
    let est = estimate_bcmsv(&problem, &BcmsvOptions { restarts: 12, seed: 1, ..BcmsvOptions::default() })?;
    println!("beta at scale {scale}: {:.4}", est.value);

    // one noisy instance, calibrated so the truth is feasible
    let mut rng = rng_from_seed(9);
    let mut values = DVector::zeros(big_n);
    for b in [3, 17] {
        for i in partition.block_range(b) {
            values[i] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let x = BlockVector::new(values, partition)?;
    let eps = DVector::from_fn(m, |_, _| 0.02 * rng.sample::<f64, _>(StandardNormal));
    let y = matrix.entries() * x.values() + &eps;
    let zeta = eps.norm();

    let instance = RecoveryProblem::new(&matrix, partition, y, RecoveryProgram::Bbp { zeta })?;
    let result = solve_recovery(&instance, &SolveOptions::default())?;
    let h = BlockVector::new(result.x_hat.values() - x.values(), partition)?;

    let input = BoundInput { beta: est.value, k, q, noise_level: zeta, kappa: None, phi_k: None };
    let bounds = theorem1_bounds(&input, ProgramKind::Bbp)?;
    println!("measured |h|_2,q = {:.4}  bound = {:.4}", h.mixed_norm(q), bounds.l2q_bound);
    println!(
        "measured |h|_2,1 = {:.4}  bound = {:.4}",
        h.mixed_norm(QParam::One),
        bounds.l21_bound
    );
    assert!(h.mixed_norm(q) <= bounds.l2q_bound);
    assert!(h.mixed_norm(QParam::One) <= bounds.l21_bound);

    // the analysis also pins the residual inside a sparsity cone
    let cone = residual_cone_check(&x, &result.x_hat, k, q, ConeProgram::Bbp)?;
    println!(
        "residual cone: k_q(h) = {:.2} <= {:.2} ({})",
        cone.kq_of_h,
        cone.cone_bound,
        if cone.inside { "inside" } else { "outside" }
    );
    Ok(())
}
