//! The three block-sparse recovery programs.
//!
//! BBP minimizes `|z|_2,1` subject to `|y - Az|_2 <= zeta`; BDS swaps the
//! constraint for `|A'(y - Az)|_2,inf <= mu`; group lasso trades the
//! constraint for a penalty, `0.5 |y - Az|_2^2 + mu |z|_2,1`.
//!
//! The constrained programs run a primal-dual splitting whose sub-steps are
//! all closed form: block soft thresholding for the mixed norm, a Euclidean
//! ball projection for BBP, per-block l2 clipping for BDS. The lasso runs an
//! accelerated proximal gradient with backtracking and a monitored descent
//! restart. Every result carries feasibility and fixed-point residuals, so
//! callers can audit solution quality instead of trusting a flag.

use nalgebra::{DMatrix, DVector};

use crate::block::{block_norms_of, mixed_norm_of_block_norms, BlockPartition, BlockVector, QParam};
use crate::ensembles::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

/// Which convex program to solve, with its noise parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecoveryProgram {
    /// `min |z|_2,1  s.t.  |y - Az|_2 <= zeta`; `zeta = 0` is the noise-free
    /// basis pursuit.
    Bbp { zeta: f64 },
    /// `min |z|_2,1  s.t.  |A'(y - Az)|_2,inf <= mu`.
    Bds { mu: f64 },
    /// `min 0.5 |y - Az|_2^2 + mu |z|_2,1`.
    GroupLasso { mu: f64 },
}

impl RecoveryProgram {
    fn validate(&self) -> Result<()> {
        match *self {
            RecoveryProgram::Bbp { zeta } if zeta >= 0.0 => Ok(()),
            RecoveryProgram::Bds { mu } if mu >= 0.0 => Ok(()),
            RecoveryProgram::GroupLasso { mu } if mu > 0.0 => Ok(()),
            RecoveryProgram::Bbp { zeta } => {
                Err(Error::invalid(format!("zeta must be nonnegative, got {zeta}")))
            }
            RecoveryProgram::Bds { mu } => {
                Err(Error::invalid(format!("mu must be nonnegative, got {mu}")))
            }
            RecoveryProgram::GroupLasso { mu } => {
                Err(Error::invalid(format!("lasso mu must be positive, got {mu}")))
            }
        }
    }
}

/// A recovery instance: measurements `y`, the matrix that produced them, the
/// block structure of the unknown, and the program to solve.
#[derive(Debug, Clone)]
pub struct RecoveryProblem<'a> {
    matrix: &'a MeasurementMatrix,
    partition: BlockPartition,
    y: DVector<f64>,
    program: RecoveryProgram,
}

impl<'a> RecoveryProblem<'a> {
    pub fn new(
        matrix: &'a MeasurementMatrix,
        partition: BlockPartition,
        y: DVector<f64>,
        program: RecoveryProgram,
    ) -> Result<Self> {
        if y.len() != matrix.num_rows() {
            return Err(Error::dims(format!(
                "datum of length {} against a matrix with {} rows",
                y.len(),
                matrix.num_rows()
            )));
        }
        if partition.total_len() != matrix.num_cols() {
            return Err(Error::dims(format!(
                "partition covers {} entries but the matrix has {} columns",
                partition.total_len(),
                matrix.num_cols()
            )));
        }
        program.validate()?;
        Ok(RecoveryProblem { matrix, partition, y, program })
    }

    pub fn program(&self) -> RecoveryProgram {
        self.program
    }
}

/// Iteration controls shared by all three solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Fixed-point / primal-dual residual target, relative to iterate scale.
    pub tol: f64,
    /// Iteration cap; hitting it reports `converged = false` rather than an
    /// error, so batch runs keep the partial solution and its residuals.
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iters: 50_000 }
    }
}

/// Solver output with its quality certificates.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub x_hat: BlockVector,
    /// Program objective at `x_hat`.
    pub objective: f64,
    /// Constraint violation at `x_hat` (for the lasso, the subgradient
    /// optimality excess `max(0, |A'(y - Ax)|_2,inf - mu)`); 0 when satisfied.
    pub primal_feasibility: f64,
    /// Terminal fixed-point or primal-dual residual, relative to scale.
    pub optimality_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value per iteration, for descent monitoring.
    pub objective_trace: Vec<f64>,
}

/// Dispatches on the problem's program.
pub fn solve_recovery(problem: &RecoveryProblem, opts: &SolveOptions) -> Result<RecoveryResult> {
    match problem.program {
        RecoveryProgram::Bbp { zeta } => bbp(problem, zeta, opts),
        RecoveryProgram::Bds { mu } => bds(problem, mu, opts),
        RecoveryProgram::GroupLasso { mu } => group_lasso(problem, mu, opts),
    }
}

pub fn solve_bbp(problem: &RecoveryProblem, opts: &SolveOptions) -> Result<RecoveryResult> {
    match problem.program {
        RecoveryProgram::Bbp { zeta } => bbp(problem, zeta, opts),
        _ => Err(Error::invalid("problem does not carry a BBP program")),
    }
}

pub fn solve_bds(problem: &RecoveryProblem, opts: &SolveOptions) -> Result<RecoveryResult> {
    match problem.program {
        RecoveryProgram::Bds { mu } => bds(problem, mu, opts),
        _ => Err(Error::invalid("problem does not carry a BDS program")),
    }
}

pub fn solve_group_lasso(problem: &RecoveryProblem, opts: &SolveOptions) -> Result<RecoveryResult> {
    match problem.program {
        RecoveryProgram::GroupLasso { mu } => group_lasso(problem, mu, opts),
        _ => Err(Error::invalid("problem does not carry a group lasso program")),
    }
}

/// Block soft threshold: each block shrinks toward zero by `thresh` in l2
/// length, vanishing when shorter than the threshold.
pub(crate) fn block_soft_threshold(
    values: &mut DVector<f64>,
    partition: BlockPartition,
    thresh: f64,
) {
    let n = partition.block_len();
    for i in 0..partition.num_blocks() {
        let b = values.rows(i * n, n).norm();
        let scale = if b <= thresh { 0.0 } else { 1.0 - thresh / b };
        for j in i * n..(i + 1) * n {
            values[j] *= scale;
        }
    }
}

/// Projection onto `{w : |w - center|_2 <= radius}`.
fn project_euclidean_ball(w: DVector<f64>, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let d = &w - center;
    let dist = d.norm();
    if dist <= radius {
        w
    } else {
        center + d * (radius / dist)
    }
}

/// Projection onto `{w : |w - center|_2,inf <= radius}`: per-block l2 clip
/// of the deviation.
fn project_blockmax_ball(
    w: DVector<f64>,
    center: &DVector<f64>,
    partition: BlockPartition,
    radius: f64,
) -> DVector<f64> {
    let mut d = &w - center;
    let n = partition.block_len();
    for i in 0..partition.num_blocks() {
        let b = d.rows(i * n, n).norm();
        if b > radius {
            let scale = radius / b;
            for j in i * n..(i + 1) * n {
                d[j] *= scale;
            }
        }
    }
    center + d
}

fn l21_norm(z: &DVector<f64>, partition: BlockPartition) -> f64 {
    mixed_norm_of_block_norms(&block_norms_of(z, partition), QParam::One)
}

fn blockmax_norm(z: &DVector<f64>, partition: BlockPartition) -> f64 {
    mixed_norm_of_block_norms(&block_norms_of(z, partition), QParam::Infinity)
}

fn correlation_excess(
    matrix: &DMatrix<f64>,
    partition: BlockPartition,
    y: &DVector<f64>,
    x: &DVector<f64>,
    mu: f64,
) -> f64 {
    let corr = matrix.transpose() * (y - matrix * x);
    (blockmax_norm(&corr, partition) - mu).max(0.0)
}

/// `(x, residual, iterations, converged, objective_trace)` from the shared
/// primal-dual loop.
type PrimalDualOutcome = (DVector<f64>, f64, usize, bool, Vec<f64>);

/// Primal-dual splitting for `min_z |z|_2,1 + F(K z)` with `F` the indicator
/// of a set with a closed-form projection. Shared by BBP (`K = A`, Euclidean
/// ball around `y`) and BDS (`K = A'A`, per-block clip around `A'y`).
fn primal_dual(
    k_op: &DMatrix<f64>,
    partition: BlockPartition,
    project_feasible: &dyn Fn(DVector<f64>) -> DVector<f64>,
    opnorm: f64,
    opts: &SolveOptions,
) -> Result<PrimalDualOutcome> {
    let n = k_op.ncols();
    let rows = k_op.nrows();
    let step = 1.0 / opnorm.max(1e-300);
    let (tau, sigma) = (step, step);
    let mut z = DVector::<f64>::zeros(n);
    let mut w = DVector::<f64>::zeros(rows);
    let mut kz = DVector::<f64>::zeros(rows);
    let mut ktw = DVector::<f64>::zeros(n);
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut kz_prev = kz.clone();
    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        // dual step on the extrapolated primal, via the Moreau identity
        let v = &w + (&kz * 2.0 - &kz_prev) * sigma;
        let w_new = &v - project_feasible(&v / sigma) * sigma;
        let ktw_new = k_op.transpose() * &w_new;
        let mut z_new = &z - &ktw_new * tau;
        block_soft_threshold(&mut z_new, partition, tau);
        let kz_new = k_op * &z_new;

        let primal_res = ((&z - &z_new) / tau - (&ktw - &ktw_new)).norm();
        let dual_res = ((&w - &w_new) / sigma - (&kz - &kz_new)).norm();
        residual = primal_res.max(dual_res) / (1.0 + z_new.norm() + w_new.norm());

        kz_prev = std::mem::replace(&mut kz, kz_new);
        ktw = ktw_new;
        z = z_new;
        w = w_new;
        trace.push(l21_norm(&z, partition));

        if !residual.is_finite() || z.norm() > 1e12 || w.norm() > 1e12 {
            return Err(Error::NotConverged(format!(
                "primal-dual iteration diverged at iteration {iterations}"
            )));
        }
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok((z, residual, iterations, converged, trace))
}

fn bbp(problem: &RecoveryProblem, zeta: f64, opts: &SolveOptions) -> Result<RecoveryResult> {
    let a = problem.matrix.entries();
    let y = &problem.y;
    // reject targets farther from the range of A than the noise budget
    let svd = a.clone().svd(true, true);
    let x_ls = svd
        .solve(y, 1e-12)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let range_dist = (y - a * &x_ls).norm();
    if range_dist > zeta + 1e-10 * y.norm().max(1.0) {
        return Err(Error::Infeasible(format!(
            "datum is {range_dist:e} from the range of the matrix, beyond the budget {zeta:e}"
        )));
    }
    let opnorm = spectral_norm(a);
    let (x, residual, iterations, converged, trace) = primal_dual(
        a,
        problem.partition,
        &|v: DVector<f64>| project_euclidean_ball(v, y, zeta),
        opnorm,
        opts,
    )?;
    let feas = ((y - a * &x).norm() - zeta).max(0.0);
    Ok(RecoveryResult {
        objective: l21_norm(&x, problem.partition),
        primal_feasibility: feas,
        optimality_residual: residual,
        iterations,
        converged,
        objective_trace: trace,
        x_hat: BlockVector::new(x, problem.partition)?,
    })
}

fn bds(problem: &RecoveryProblem, mu: f64, opts: &SolveOptions) -> Result<RecoveryResult> {
    let a = problem.matrix.entries();
    let y = &problem.y;
    let gram = a.transpose() * a;
    let b = a.transpose() * y;
    let opnorm = spectral_norm(a).powi(2);
    let partition = problem.partition;
    let (x, residual, iterations, converged, trace) = primal_dual(
        &gram,
        partition,
        &|v: DVector<f64>| project_blockmax_ball(v, &b, partition, mu),
        opnorm,
        opts,
    )?;
    let feas = (blockmax_norm(&(&b - &gram * &x), partition) - mu).max(0.0);
    Ok(RecoveryResult {
        objective: l21_norm(&x, partition),
        primal_feasibility: feas,
        optimality_residual: residual,
        iterations,
        converged,
        objective_trace: trace,
        x_hat: BlockVector::new(x, partition)?,
    })
}

fn group_lasso(problem: &RecoveryProblem, mu: f64, opts: &SolveOptions) -> Result<RecoveryResult> {
    let a = problem.matrix.entries();
    let y = &problem.y;
    let partition = problem.partition;
    let objective = |x: &DVector<f64>| {
        let r = y - a * x;
        0.5 * r.norm_squared() + mu * l21_norm(x, partition)
    };
    let mut lipschitz = spectral_norm(a).powi(2).max(1e-12);
    let mut x = DVector::<f64>::zeros(a.ncols());
    let mut f_x = objective(&x);
    let mut v = x.clone();
    let mut t = 1.0f64;
    let mut trace = vec![f_x];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        let r = a * &v - y;
        let grad = a.transpose() * &r;
        let smooth_v = 0.5 * r.norm_squared();
        lipschitz = (lipschitz * 0.9).max(1e-12);
        let mut x_new;
        let mut f_new;
        loop {
            x_new = &v - &grad / lipschitz;
            block_soft_threshold(&mut x_new, partition, mu / lipschitz);
            let diff = &x_new - &v;
            let r_new = y - a * &x_new;
            let smooth_new = 0.5 * r_new.norm_squared();
            f_new = smooth_new + mu * l21_norm(&x_new, partition);
            let slack = 1e-12 * (1.0 + smooth_v.abs());
            if smooth_new
                <= smooth_v + grad.dot(&diff) + 0.5 * lipschitz * diff.norm_squared() + slack
                || lipschitz >= 1e15
            {
                break;
            }
            lipschitz *= 2.0;
        }
        if f_new > f_x + 1e-12 * (1.0 + f_x.abs()) {
            // momentum overshoot: restart from the last accepted iterate
            v = x.clone();
            t = 1.0;
            continue;
        }
        let step = (&x_new - &v).norm();
        residual = lipschitz * step / (1.0 + x_new.norm());
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        x = x_new;
        f_x = f_new;
        t = t_new;
        trace.push(f_x);
        if residual <= opts.tol || step <= 1e-16 * (1.0 + x.norm()) {
            converged = true;
            residual = residual.min(opts.tol);
            break;
        }
    }
    let feas = correlation_excess(a, partition, y, &x, mu);
    Ok(RecoveryResult {
        objective: f_x,
        primal_feasibility: feas,
        optimality_residual: residual,
        iterations,
        converged,
        objective_trace: trace,
        x_hat: BlockVector::new(x, partition)?,
    })
}

/// Which cone bound applies when auditing a recovery residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConeProgram {
    Bbp,
    Bds,
    /// Group lasso under noise fraction `kappa` in [0, 1).
    GroupLasso { kappa: f64 },
}

/// What [`residual_cone_check`] reports.
#[derive(Debug, Clone, Copy)]
pub struct ConeReport {
    /// q-ratio block sparsity of the residual `x_hat - x_true`.
    pub kq_of_h: f64,
    /// The program's cone bound at level `k`.
    pub cone_bound: f64,
    pub inside: bool,
}

/// Checks that the recovery residual `h = x_hat - x_true` lies in the
/// program's sparsity cone: `k_q(h) <= 2^(q/(q-1)) k` for the constrained
/// programs and `k_q(h) <= (2/(1-kappa))^(q/(q-1)) k` for the lasso. A zero
/// residual is inside by convention.
pub fn residual_cone_check(
    x_true: &BlockVector,
    x_hat: &BlockVector,
    k: usize,
    q: QParam,
    program: ConeProgram,
) -> Result<ConeReport> {
    if x_true.partition() != x_hat.partition() {
        return Err(Error::dims("mismatched block partitions".to_string()));
    }
    let p = x_true.partition().num_blocks();
    if k == 0 || k > p {
        return Err(Error::invalid(format!("sparsity level k={k} outside 1..={p}")));
    }
    let exponent = q.ratio_exponent()?;
    let base = match program {
        ConeProgram::Bbp | ConeProgram::Bds => 2.0,
        ConeProgram::GroupLasso { kappa } => {
            if !(0.0..1.0).contains(&kappa) {
                return Err(Error::invalid(format!("kappa={kappa} outside [0, 1)")));
            }
            2.0 / (1.0 - kappa)
        }
    };
    let cone_bound = base.powf(exponent) * k as f64;
    let h = BlockVector::new(x_hat.values() - x_true.values(), x_true.partition())?;
    let h_scale = h.mixed_norm(q);
    if h_scale <= 1e-12 * x_true.mixed_norm(q).max(1.0) {
        return Ok(ConeReport { kq_of_h: 0.0, cone_bound, inside: true });
    }
    let kq_of_h = h.q_ratio_sparsity(q);
    Ok(ConeReport { kq_of_h, cone_bound, inside: kq_of_h <= cone_bound + 1e-9 })
}
