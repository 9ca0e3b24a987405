//! Estimation of the block-constrained minimal singular value (BCMSV).
//!
//! For a matrix A, order q > 1 and level s in [1, p], the BCMSV is
//!
//! ```text
//! beta_{q,s}(A) = min { |Az|_2 / |z|_2,q : z != 0, k_q(z) <= s }
//! ```
//!
//! where `k_q` is the q-ratio block sparsity. Equivalently, it is the minimum
//! of `|Az|_2` over the set `{ |z|_2,q = 1, |z|_2,1 <= s^{(q-1)/q} }`. The
//! problem is nonconvex, so the estimator runs many restarts of a local
//! method and reports the smallest value found across the restarts that
//! converged; the result is therefore an upper bound on the true BCMSV and
//! reproduces it in practice at these scales.
//!
//! Each restart minimizes an augmented Lagrangian for the norm-equality
//! constraint, with accelerated projected-gradient inner iterations onto the
//! mixed l2/l1 ball. The q = inf branch replaces the smooth norm gradient by
//! a max-block subgradient phase followed by a smooth solve anchored at the
//! winning block.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::block::{
    block_norms_of, mixed_norm_gradient, mixed_norm_of_block_norms, BlockPartition, BlockVector,
    QParam,
};
use crate::ensembles::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::rng::{derive_seed, rng_from_seed};

/// BCMSV instance: matrix, block layout, order q > 1, and level s in [1, p].
#[derive(Debug, Clone)]
pub struct BcmsvProblem<'a> {
    matrix: &'a MeasurementMatrix,
    partition: BlockPartition,
    q: QParam,
    s: f64,
}

impl<'a> BcmsvProblem<'a> {
    pub fn new(
        matrix: &'a MeasurementMatrix,
        partition: BlockPartition,
        q: QParam,
        s: f64,
    ) -> Result<Self> {
        if partition.total_len() != matrix.num_cols() {
            return Err(Error::dims(format!(
                "partition covers {} entries but the matrix has {} columns",
                partition.total_len(),
                matrix.num_cols()
            )));
        }
        if !q.is_above_one() {
            return Err(Error::invalid(format!("BCMSV order must satisfy q > 1, got {q}")));
        }
        let p = partition.num_blocks() as f64;
        if !(1.0..=p).contains(&s) {
            return Err(Error::invalid(format!(
                "sparsity level s={s} outside [1, p] with p={p}"
            )));
        }
        Ok(BcmsvProblem {
            matrix,
            partition,
            q,
            s,
        })
    }

    pub fn matrix(&self) -> &MeasurementMatrix {
        self.matrix
    }

    pub fn partition(&self) -> BlockPartition {
        self.partition
    }

    pub fn q(&self) -> QParam {
        self.q
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Radius of the mixed l2/l1 ball in the equality-constrained form:
    /// `s^{(q-1)/q}`, which is `s` itself at q = inf.
    pub fn l1_radius(&self) -> f64 {
        match self.q {
            QParam::Infinity => self.s,
            QParam::Finite(q) => self.s.powf((q - 1.0) / q),
            _ => unreachable!("constructor enforces q > 1"),
        }
    }
}

/// Knobs for the multi-start estimator.
#[derive(Debug, Clone)]
pub struct BcmsvOptions {
    /// Number of random restarts; the reported value is the minimum over the
    /// converged ones.
    pub restarts: usize,
    /// Stationarity/feasibility target for a restart to count as converged.
    pub tol: f64,
    /// Iteration cap for each inner projected-gradient solve.
    pub max_inner_iters: usize,
    /// Cap on augmented-Lagrangian multiplier updates per restart.
    pub max_outer_iters: usize,
    /// Master seed; restart r uses the derived stream (seed, r).
    pub seed: u64,
}

impl Default for BcmsvOptions {
    fn default() -> Self {
        BcmsvOptions {
            restarts: 40,
            tol: 1e-8,
            max_inner_iters: 5000,
            max_outer_iters: 60,
            seed: 0,
        }
    }
}

/// Multi-start estimation result.
#[derive(Debug, Clone)]
pub struct BcmsvEstimate {
    /// Smallest objective across converged restarts (ties: lowest index).
    pub value: f64,
    /// Objective reached by every restart, converged or not.
    pub per_restart_values: Vec<f64>,
    /// Stationarity residual of every restart at its final iterate.
    pub kkt_residuals: Vec<f64>,
    /// Which restarts passed the convergence and feasibility checks.
    pub converged: Vec<bool>,
    /// Index of the restart that produced `value`.
    pub best_restart: usize,
    /// Minimizer found by the best restart, normalized to unit (2,q) norm.
    pub witness: BlockVector,
}

/// Estimates the BCMSV by multi-start local minimization. Errors with full
/// diagnostics when no restart converges.
pub fn estimate_bcmsv(problem: &BcmsvProblem, opts: &BcmsvOptions) -> Result<BcmsvEstimate> {
    if opts.restarts == 0 {
        return Err(Error::invalid("restarts must be positive"));
    }
    // Scale-normalize once: the minimizers of |Az| over the feasible cone do
    // not move under A -> A/c, and values scale back by c. Powers of two in
    // particular round-trip exactly.
    let sigma = spectral_norm(problem.matrix.entries());
    if sigma == 0.0 {
        return Err(Error::Degenerate("zero matrix has BCMSV 0".into()));
    }
    let normalized = problem.matrix.entries() / sigma;
    let gram = normalized.transpose() * &normalized;
    let radius = problem.l1_radius();

    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            run_restart(
                &normalized,
                &gram,
                problem.partition,
                problem.q,
                problem.s,
                radius,
                derive_seed(opts.seed, r as u64),
                opts,
            )
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if o.converged && best.is_none_or(|b| o.value < outcomes[b].value) {
            best = Some(i);
        }
    }
    let per_restart_values: Vec<f64> = outcomes.iter().map(|o| o.value * sigma).collect();
    let kkt_residuals: Vec<f64> = outcomes.iter().map(|o| o.kkt).collect();
    let converged: Vec<bool> = outcomes.iter().map(|o| o.converged).collect();
    match best {
        Some(b) => Ok(BcmsvEstimate {
            value: per_restart_values[b],
            witness: BlockVector::new(outcomes[b].z.clone(), problem.partition)?,
            per_restart_values,
            kkt_residuals,
            converged,
            best_restart: b,
        }),
        None => {
            let (bi, bv) = per_restart_values
                .iter()
                .enumerate()
                .fold((0usize, f64::INFINITY), |acc, (i, &v)| {
                    if v < acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                });
            Err(Error::NoConvergedRestart {
                best_value: bv,
                best_residual: kkt_residuals[bi],
                per_restart_values,
                kkt_residuals,
            })
        }
    }
}

/// Euclidean projection onto `{ z : sum_i |z_i|_2 <= radius }`.
///
/// Block norms are soft-thresholded at the level theta solving
/// `sum_i max(b_i - theta, 0) = radius`; each block is rescaled by its
/// thresholded norm. Points already inside come back unchanged.
pub fn project_mixed_l1_ball(x: &BlockVector, radius: f64) -> Result<BlockVector> {
    if !(radius >= 0.0) {
        return Err(Error::invalid(format!("radius must be >= 0, got {radius}")));
    }
    let mut values = x.values().clone();
    project_l1_inplace(&mut values, x.partition(), radius);
    BlockVector::new(values, x.partition())
}

pub(crate) fn project_l1_inplace(values: &mut DVector<f64>, partition: BlockPartition, radius: f64) {
    let norms = block_norms_of(values, partition);
    let total: f64 = norms.iter().sum();
    if total <= radius {
        return;
    }
    if radius == 0.0 {
        values.fill(0.0);
        return;
    }
    let mut sorted = norms.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &b) in sorted.iter().enumerate() {
        cum += b;
        let cand = (cum - radius) / (j + 1) as f64;
        if b - cand > 0.0 {
            theta = cand;
        } else {
            break;
        }
    }
    let n = partition.block_len();
    for (i, &b) in norms.iter().enumerate() {
        let factor = if b > theta { (b - theta) / b } else { 0.0 };
        for j in i * n..(i + 1) * n {
            values[j] *= factor;
        }
    }
}

/// Embedding-chain check between two orders `1 < q2 < q1 <= inf`:
///
/// ```text
/// beta_{q1,s} >= beta_{q2, s^t} >= s^{-t} beta_{q1, s^t},   t = q2(q1-1)/(q1(q2-1))
/// ```
///
/// All three quantities are estimated with the same restart budget; `holds`
/// allows the additive `slack` on both inequalities since the estimates
/// carry solver noise.
#[derive(Debug, Clone)]
pub struct Prop2Report {
    pub q_tilde: f64,
    pub beta_q1_s: f64,
    pub beta_q2_s_tilde: f64,
    /// `s^{-q_tilde} * beta_{q1, s^{q_tilde}}`, the right end of the chain.
    pub beta_q1_s_tilde_scaled: f64,
    pub slack: f64,
    pub holds: bool,
}

pub fn check_prop2_chain(
    matrix: &MeasurementMatrix,
    partition: BlockPartition,
    q1: QParam,
    q2: QParam,
    s: f64,
    opts: &BcmsvOptions,
) -> Result<Prop2Report> {
    let (q1v, q2v) = (q1.value(), q2.value());
    if !(q2v > 1.0) || !(q1v > q2v) {
        return Err(Error::invalid(format!(
            "embedding chain needs 1 < q2 < q1 <= inf, got q1={q1}, q2={q2}"
        )));
    }
    let q_tilde = if q1v.is_infinite() {
        q2v / (q2v - 1.0)
    } else {
        q2v * (q1v - 1.0) / (q1v * (q2v - 1.0))
    };
    let s_tilde = s.powf(q_tilde);
    let p = partition.num_blocks() as f64;
    if !(1.0..=p).contains(&s) || !(1.0..=p).contains(&s_tilde) {
        return Err(Error::invalid(format!(
            "levels s={s} and s^t={s_tilde} must both lie in [1, p={p}]"
        )));
    }
    let slack = 1e-3;
    let beta_q1_s = estimate_bcmsv(&BcmsvProblem::new(matrix, partition, q1, s)?, opts)?.value;
    let beta_q2_s_tilde =
        estimate_bcmsv(&BcmsvProblem::new(matrix, partition, q2, s_tilde)?, opts)?.value;
    let beta_q1_s_tilde =
        estimate_bcmsv(&BcmsvProblem::new(matrix, partition, q1, s_tilde)?, opts)?.value;
    let beta_q1_s_tilde_scaled = s.powf(-q_tilde) * beta_q1_s_tilde;
    let holds = beta_q1_s >= beta_q2_s_tilde - slack
        && beta_q2_s_tilde >= beta_q1_s_tilde_scaled - slack;
    Ok(Prop2Report {
        q_tilde,
        beta_q1_s,
        beta_q2_s_tilde,
        beta_q1_s_tilde_scaled,
        slack,
        holds,
    })
}

struct RestartOutcome {
    value: f64,
    kkt: f64,
    converged: bool,
    z: DVector<f64>,
}

/// The norm whose level set the augmented Lagrangian pins at one. For
/// q = inf the smooth phase anchors a specific block.
#[derive(Clone, Copy)]
enum HForm {
    Mixed(QParam),
    Anchored(usize),
}

impl HForm {
    fn eval(&self, z: &DVector<f64>, partition: BlockPartition) -> f64 {
        match self {
            HForm::Mixed(q) => mixed_norm_of_block_norms(&block_norms_of(z, partition), *q),
            HForm::Anchored(i) => z.rows(i * partition.block_len(), partition.block_len()).norm(),
        }
    }

    fn grad(&self, z: &DVector<f64>, partition: BlockPartition) -> DVector<f64> {
        match self {
            HForm::Mixed(q) => mixed_norm_gradient(z, partition, *q),
            HForm::Anchored(i) => {
                let n = partition.block_len();
                let b = z.rows(i * n, n).norm();
                let mut g = DVector::zeros(z.len());
                if b > 0.0 {
                    for j in i * n..(i + 1) * n {
                        g[j] = z[j] / b;
                    }
                }
                g
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_restart(
    normalized: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    partition: BlockPartition,
    q: QParam,
    s: f64,
    radius: f64,
    seed: u64,
    opts: &BcmsvOptions,
) -> RestartOutcome {
    let mut rng = rng_from_seed(seed);
    let mut z = feasible_init(&mut rng, partition, q, s, radius);

    let (mut z, mut kkt) = match q {
        QParam::Infinity => {
            // Localize the active block with a subgradient phase, then solve
            // the smooth anchored problem; retry if the anchor loses the max.
            let mut best = (z.clone(), f64::INFINITY);
            for _attempt in 0..3 {
                z = subgradient_phase(gram, partition, radius, z, 400);
                let norms = block_norms_of(&z, partition);
                let anchor = argmax(&norms);
                let (z_new, kkt) =
                    augmented_lagrangian(gram, partition, HForm::Anchored(anchor), radius, z.clone(), opts);
                let norms_new = block_norms_of(&z_new, partition);
                let anchor_new = argmax(&norms_new);
                best = (z_new.clone(), kkt);
                if anchor_new == anchor
                    || norms_new[anchor_new] <= norms_new[anchor] * (1.0 + 1e-9)
                {
                    break;
                }
                z = z_new;
            }
            best
        }
        _ => augmented_lagrangian(gram, partition, HForm::Mixed(q), radius, z, opts),
    };

    // Rescale to unit (2,q) norm; the objective ratio and the q-ratio
    // sparsity are scale-invariant, so this only tidies the certificate.
    let h = mixed_norm_of_block_norms(&block_norms_of(&z, partition), q);
    if h > 0.0 {
        z /= h;
    }
    let value = (normalized * &z).norm();
    let l1 = mixed_norm_of_block_norms(&block_norms_of(&z, partition), QParam::One);
    let feasible = h > 0.0 && l1 <= radius + 1e-6;
    if !feasible {
        kkt = f64::INFINITY;
    }
    RestartOutcome {
        value,
        kkt,
        converged: feasible && kkt < opts.tol.max(1e-12),
        z,
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Draws `z+ - z-` with i.i.d. uniform parts and pushes it into the feasible
/// set `{ |z|_2,q = 1, |z|_2,1 <= radius }` by alternating normalization and
/// ball projection. Falls back to a random floor(s)-block-sparse direction,
/// which is feasible outright.
fn feasible_init(
    rng: &mut impl Rng,
    partition: BlockPartition,
    q: QParam,
    s: f64,
    radius: f64,
) -> DVector<f64> {
    let n = partition.total_len();
    for _attempt in 0..4 {
        let mut z = DVector::from_fn(n, |_, _| rng.random::<f64>() - rng.random::<f64>());
        for _round in 0..300 {
            let h = mixed_norm_of_block_norms(&block_norms_of(&z, partition), q);
            if h < 1e-12 {
                break;
            }
            z /= h;
            let l1 = mixed_norm_of_block_norms(&block_norms_of(&z, partition), QParam::One);
            if l1 <= radius * (1.0 + 1e-12) {
                return z;
            }
            project_l1_inplace(&mut z, partition, radius);
        }
    }
    // sparse fallback: k_q of a j-block vector is at most j <= s
    let p = partition.num_blocks();
    let keep = (s.floor() as usize).clamp(1, p);
    let mut idx: Vec<usize> = (0..p).collect();
    for i in 0..keep {
        let j = i + rng.random_range(0..p - i);
        idx.swap(i, j);
    }
    let mut z = DVector::zeros(n);
    for &b in &idx[..keep] {
        for j in partition.block_range(b) {
            z[j] = rng.random::<f64>() - 0.5;
        }
    }
    let h = mixed_norm_of_block_norms(&block_norms_of(&z, partition), q);
    if h > 0.0 {
        z /= h;
    } else {
        z[0] = 1.0;
    }
    z
}

/// Projected subgradient steps on the augmented Lagrangian for q = inf,
/// used only to find the active block before the smooth anchored solve.
fn subgradient_phase(
    gram: &DMatrix<f64>,
    partition: BlockPartition,
    radius: f64,
    mut z: DVector<f64>,
    iters: usize,
) -> DVector<f64> {
    let rho = 10.0;
    for k in 0..iters {
        let h = mixed_norm_of_block_norms(&block_norms_of(&z, partition), QParam::Infinity);
        let grad_h = mixed_norm_gradient(&z, partition, QParam::Infinity);
        let g = h - 1.0;
        let mut d = gram * &z;
        d.axpy(rho * g, &grad_h, 1.0);
        let step = 0.2 / (1.0 + k as f64).sqrt();
        let dn = d.norm();
        if dn > 0.0 {
            z.axpy(-step / dn, &d, 1.0);
        }
        project_l1_inplace(&mut z, partition, radius);
        let h2 = mixed_norm_of_block_norms(&block_norms_of(&z, partition), QParam::Infinity);
        if h2 > 0.0 {
            // keep the iterate near the unit level set without leaving the
            // feasible cone: rescaling preserves the sparsity ratio
            if h2 > 1.0 {
                z /= h2;
            }
        }
    }
    z
}

/// Outer augmented-Lagrangian loop on `h(z) = 1` over the mixed l1 ball.
/// Returns the final iterate and its stationarity residual.
fn augmented_lagrangian(
    gram: &DMatrix<f64>,
    partition: BlockPartition,
    hform: HForm,
    radius: f64,
    mut z: DVector<f64>,
    opts: &BcmsvOptions,
) -> (DVector<f64>, f64) {
    let mut lambda = 0.0f64;
    let mut rho = 1.0f64;
    let mut g_prev = f64::INFINITY;
    let mut lipschitz = 2.0f64;
    let mut kkt = f64::INFINITY;
    let floor = (opts.tol * 0.1).max(1e-13);
    for _outer in 0..opts.max_outer_iters {
        // inexact schedule: solve loosely while the constraint is far off,
        // tightly once the multiplier has settled
        let inner_tol = (0.1 * g_prev).clamp(floor, 1e-4);
        let (z_new, l_new) = fista_ball(
            gram,
            partition,
            hform,
            radius,
            lambda,
            rho,
            z,
            lipschitz,
            inner_tol,
            opts.max_inner_iters,
        );
        z = z_new;
        lipschitz = (l_new * 0.5).clamp(1.0, 1e8);
        let h = hform.eval(&z, partition);
        let g = h - 1.0;
        kkt = stationarity_residual(gram, partition, hform, radius, &z, lambda + rho * g);
        if g.abs() < opts.tol.max(1e-10) && kkt < opts.tol {
            break;
        }
        lambda += rho * g;
        if g.abs() > 0.25 * g_prev {
            rho = (rho * 10.0).min(1e6);
        }
        g_prev = g.abs();
    }
    (z, kkt)
}

/// Residual of the projected-gradient fixed-point condition for the true
/// Lagrangian (multiplier estimate `lambda_hat`) with unit virtual step.
fn stationarity_residual(
    gram: &DMatrix<f64>,
    partition: BlockPartition,
    hform: HForm,
    radius: f64,
    z: &DVector<f64>,
    lambda_hat: f64,
) -> f64 {
    let mut grad = gram * z;
    grad.axpy(lambda_hat, &hform.grad(z, partition), 1.0);
    let mut moved = z - &grad;
    project_l1_inplace(&mut moved, partition, radius);
    (z - &moved).norm()
}

/// Accelerated projected gradient with backtracking and monotone restarts on
/// `0.5 z'Gz + lambda (h(z)-1) + rho/2 (h(z)-1)^2` over the mixed l1 ball.
/// Returns the solution and the final Lipschitz estimate.
#[allow(clippy::too_many_arguments)]
fn fista_ball(
    gram: &DMatrix<f64>,
    partition: BlockPartition,
    hform: HForm,
    radius: f64,
    lambda: f64,
    rho: f64,
    z0: DVector<f64>,
    mut lipschitz: f64,
    tol: f64,
    max_iters: usize,
) -> (DVector<f64>, f64) {
    let phi = |z: &DVector<f64>, gz: &DVector<f64>| -> f64 {
        let g = hform.eval(z, partition) - 1.0;
        0.5 * z.dot(gz) + lambda * g + 0.5 * rho * g * g
    };
    let mut z = z0;
    let mut f_z = phi(&z, &(gram * &z));
    let mut y = z.clone();
    let mut t = 1.0f64;
    for _k in 0..max_iters {
        let gy = gram * &y;
        let gval = hform.eval(&y, partition) - 1.0;
        let mut grad = gy.clone();
        grad.axpy(lambda + rho * gval, &hform.grad(&y, partition), 1.0);
        let f_y = 0.5 * y.dot(&gy) + lambda * gval + 0.5 * rho * gval * gval;
        // let an inflated Lipschitz estimate recover between steps
        lipschitz = (lipschitz * 0.9).max(1.0);
        let mut z_new;
        let mut f_new;
        loop {
            z_new = &y - &grad / lipschitz;
            project_l1_inplace(&mut z_new, partition, radius);
            let diff = &z_new - &y;
            f_new = phi(&z_new, &(gram * &z_new));
            let slack = 1e-12 * (1.0 + f_y.abs());
            if f_new
                <= f_y + grad.dot(&diff) + 0.5 * lipschitz * diff.norm_squared() + slack
                || lipschitz >= 1e12
            {
                break;
            }
            lipschitz *= 2.0;
        }
        if f_new > f_z + 1e-12 * (1.0 + f_z.abs()) {
            // momentum overshoot: retake the step plainly from the iterate
            y = z.clone();
            t = 1.0;
            continue;
        }
        let step = (&z_new - &y).norm();
        let residual = lipschitz * step;
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &z_new + (&z_new - &z) * ((t - 1.0) / t_new);
        z = z_new;
        f_z = f_new;
        t = t_new;
        if residual <= tol * (1.0 + z.norm()) || step <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    (z, lipschitz)
}
