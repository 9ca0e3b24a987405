//! Recovery error bounds and the block-RIC comparison.
//!
//! The first half evaluates the twelve bounds on `|x_hat - x|_2,q` and
//! `|x_hat - x|_2,1`: six for exactly block sparse signals and six for
//! compressible ones, two per program. Each bound divides the noise level by
//! the BCMSV raised to the first or second power, and each is valid only when
//! the BCMSV is evaluated at a program-specific sparsity scale, which the
//! evaluators return so callers can verify they estimated at the right one.
//!
//! The second half estimates the block restricted isometry constant of order
//! 2k by Monte Carlo over column submatrices and evaluates the classical
//! RIC-based bound, enabling a head-to-head comparison on the same matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bcmsv::{estimate_bcmsv, BcmsvOptions, BcmsvProblem};
use crate::block::{BlockPartition, QParam};
use crate::ensembles::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::linalg::singular_extremes;
use crate::rng::{derive_seed, rng_from_seed};
use rand::Rng;

/// Which program a bound refers to. The group lasso additionally needs the
/// noise fraction `kappa` from [`BoundInput`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramKind {
    Bbp,
    Bds,
    GroupLasso,
}

/// Everything a bound evaluation consumes.
#[derive(Debug, Clone, Copy)]
pub struct BoundInput {
    /// BCMSV of the measurement matrix at the required scale.
    pub beta: f64,
    /// Block sparsity level of the signal (or its approximation level).
    pub k: usize,
    pub q: QParam,
    /// `zeta` for BBP, `mu` for BDS and the lasso.
    pub noise_level: f64,
    /// Noise fraction in (0, 1); group lasso only.
    pub kappa: Option<f64>,
    /// Best block-k-term approximation error; compressible bounds only.
    pub phi_k: Option<f64>,
}

/// A pair of error bounds and the sparsity scale their `beta` must use.
#[derive(Debug, Clone, Copy)]
pub struct TheoremBounds {
    /// Bound on `|x_hat - x|_2,q`.
    pub l2q_bound: f64,
    /// Bound on `|x_hat - x|_2,1`.
    pub l21_bound: f64,
    /// The level `s` at which the supplied `beta` must have been evaluated.
    pub required_scale: f64,
}

fn check_common(input: &BoundInput, program: ProgramKind) -> Result<f64> {
    if !(input.beta > 0.0) {
        return Err(Error::invalid(format!(
            "bounds are undefined for beta = {}; a vanishing BCMSV certifies nothing",
            input.beta
        )));
    }
    if input.k == 0 {
        return Err(Error::invalid("sparsity level k must be positive"));
    }
    if !input.q.is_above_one() {
        return Err(Error::invalid(format!("bounds need q > 1, got q={}", input.q)));
    }
    if !(input.noise_level >= 0.0) {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    match program {
        ProgramKind::GroupLasso => match input.kappa {
            Some(kappa) if 0.0 < kappa && kappa < 1.0 => Ok(kappa),
            Some(kappa) => Err(Error::invalid(format!("kappa={kappa} outside (0, 1)"))),
            None => Err(Error::invalid("group lasso bounds need kappa")),
        },
        _ => Ok(f64::NAN),
    }
}

/// The scale `base^(q/(q-1)) k` common to all bounds; `base` is 2 for the
/// exactly sparse case, 4 for the compressible case, divided by `1 - kappa`
/// for the lasso.
fn scale(base: f64, k: usize, q: QParam) -> Result<f64> {
    Ok(base.powf(q.ratio_exponent()?) * k as f64)
}

/// Sparsity scale for the exactly-sparse bounds (Theorem-1 family). Callable
/// before estimating `beta`, so the estimate can be made at the right level.
pub fn theorem1_scale(k: usize, q: QParam, program: ProgramKind, kappa: Option<f64>) -> Result<f64> {
    match program {
        ProgramKind::Bbp | ProgramKind::Bds => scale(2.0, k, q),
        ProgramKind::GroupLasso => {
            let kappa = kappa.ok_or_else(|| Error::invalid("group lasso scale needs kappa"))?;
            if !(0.0 < kappa && kappa < 1.0) {
                return Err(Error::invalid(format!("kappa={kappa} outside (0, 1)")));
            }
            scale(2.0 / (1.0 - kappa), k, q)
        }
    }
}

/// Sparsity scale for the compressible-signal bounds.
pub fn theorem2_scale(k: usize, q: QParam, program: ProgramKind, kappa: Option<f64>) -> Result<f64> {
    match program {
        ProgramKind::Bbp | ProgramKind::Bds => scale(4.0, k, q),
        ProgramKind::GroupLasso => {
            let kappa = kappa.ok_or_else(|| Error::invalid("group lasso scale needs kappa"))?;
            if !(0.0 < kappa && kappa < 1.0) {
                return Err(Error::invalid(format!("kappa={kappa} outside (0, 1)")));
            }
            scale(4.0 / (1.0 - kappa), k, q)
        }
    }
}

/// Error bounds for an exactly block k-sparse signal.
///
/// BBP: `2 zeta / beta` and `4 k^(1-1/q) zeta / beta`. BDS: `4 k^(1-1/q) mu
/// / beta^2` and `8 k^(2-2/q) mu / beta^2`. Group lasso: the BDS forms halved
/// and multiplied by `(1+kappa)/(1-kappa)` and `(1+kappa)/(1-kappa)^2`. The
/// supplied `beta` must be the BCMSV at the returned `required_scale`.
pub fn theorem1_bounds(input: &BoundInput, program: ProgramKind) -> Result<TheoremBounds> {
    let kappa = check_common(input, program)?;
    let k1q = (input.k as f64).powf(input.q.one_minus_inv()?);
    let noise = input.noise_level;
    let beta = input.beta;
    let (l2q, l21, required_scale) = match program {
        ProgramKind::Bbp => (
            2.0 * noise / beta,
            4.0 * k1q * noise / beta,
            scale(2.0, input.k, input.q)?,
        ),
        ProgramKind::Bds => (
            4.0 * k1q * noise / (beta * beta),
            8.0 * k1q * k1q * noise / (beta * beta),
            scale(2.0, input.k, input.q)?,
        ),
        ProgramKind::GroupLasso => {
            let f = (1.0 + kappa) / (1.0 - kappa);
            (
                f * 2.0 * k1q * noise / (beta * beta),
                f / (1.0 - kappa) * 4.0 * k1q * k1q * noise / (beta * beta),
                scale(2.0 / (1.0 - kappa), input.k, input.q)?,
            )
        }
    };
    Ok(TheoremBounds { l2q_bound: l2q, l21_bound: l21, required_scale })
}

/// Error bounds for a block compressible signal: the exactly-sparse forms
/// with doubled measurement-error constants, evaluated at a doubled scale,
/// plus a sparsity-defect term in `phi_k`. Setting `phi_k = 0` recovers the
/// exactly-sparse forms at the larger scale.
pub fn theorem2_bounds(input: &BoundInput, program: ProgramKind) -> Result<TheoremBounds> {
    let kappa = check_common(input, program)?;
    let phi = match input.phi_k {
        Some(phi) if phi >= 0.0 => phi,
        Some(phi) => return Err(Error::invalid(format!("phi_k={phi} must be nonnegative"))),
        None => return Err(Error::invalid("compressible bounds need phi_k")),
    };
    let k1q = (input.k as f64).powf(input.q.one_minus_inv()?);
    let noise = input.noise_level;
    let beta = input.beta;
    let (l2q, l21, required_scale) = match program {
        ProgramKind::Bbp => (
            2.0 * noise / beta + phi / k1q,
            4.0 * k1q * noise / beta + 4.0 * phi,
            scale(4.0, input.k, input.q)?,
        ),
        ProgramKind::Bds => (
            8.0 * k1q * noise / (beta * beta) + phi / k1q,
            16.0 * k1q * k1q * noise / (beta * beta) + 4.0 * phi,
            scale(4.0, input.k, input.q)?,
        ),
        ProgramKind::GroupLasso => {
            let f = (1.0 + kappa) / (1.0 - kappa);
            (
                f * 4.0 * k1q * noise / (beta * beta) + phi / k1q,
                f / (1.0 - kappa) * 8.0 * k1q * k1q * noise / (beta * beta)
                    + 4.0 / (1.0 - kappa) * phi,
                scale(4.0 / (1.0 - kappa), input.k, input.q)?,
            )
        }
    };
    Ok(TheoremBounds { l2q_bound: l2q, l21_bound: l21, required_scale })
}

/// Monte Carlo estimate of the block restricted isometry constant.
#[derive(Debug, Clone, Copy)]
pub struct RicEstimate {
    /// Maximum of `max(sigma_max^2 - 1, 1 - sigma_min^2)` over the sampled
    /// column submatrices. A sampled maximum never exceeds the true constant,
    /// so RIC bounds computed from it are optimistic for the RIC side.
    pub delta_2k: f64,
    /// Submatrices actually examined (the full count when exhaustive).
    pub num_samples: usize,
    /// Whether the RIC bound applies: `delta_2k < sqrt(2) - 1`.
    pub admissible: bool,
}

/// Counts k-subsets of a p-set, saturating once the count exceeds `cap`.
fn binomial_capped(p: usize, k: usize, cap: usize) -> usize {
    if k > p {
        return 0;
    }
    let k = k.min(p - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (p - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return cap + 1;
        }
    }
    acc as usize
}

fn submatrix_stat(a: &DMatrix<f64>, partition: BlockPartition, blocks: &[usize]) -> f64 {
    let n = partition.block_len();
    let m = a.nrows();
    let mut sub = DMatrix::zeros(m, blocks.len() * n);
    for (j, &b) in blocks.iter().enumerate() {
        sub.columns_mut(j * n, n).copy_from(&a.columns(b * n, n));
    }
    let (lo, hi) = singular_extremes(&sub);
    (hi * hi - 1.0).max(1.0 - lo * lo)
}

/// Estimates `delta_2k` from `num_samples` uniformly random size-2k block
/// subsets, or from all of them when there are at most `num_samples`. The
/// sample list is nested in `num_samples` for a fixed seed, so the estimate
/// is non-decreasing as the budget grows.
pub fn estimate_block_ric(
    matrix: &MeasurementMatrix,
    partition: BlockPartition,
    k: usize,
    num_samples: usize,
    seed: u64,
) -> Result<RicEstimate> {
    if partition.total_len() != matrix.num_cols() {
        return Err(Error::dims(format!(
            "partition covers {} entries but the matrix has {} columns",
            partition.total_len(),
            matrix.num_cols()
        )));
    }
    let p = partition.num_blocks();
    if k == 0 || 2 * k > p {
        return Err(Error::invalid(format!(
            "order 2k = {} must lie in 2..={p}",
            2 * k
        )));
    }
    if num_samples == 0 {
        return Err(Error::invalid("sample budget must be positive"));
    }
    let a = matrix.entries();
    let r = 2 * k;
    let exhaustive = binomial_capped(p, r, num_samples) <= num_samples;
    let subsets: Vec<Vec<usize>> = if exhaustive {
        let mut all = Vec::new();
        let mut idx: Vec<usize> = (0..r).collect();
        loop {
            all.push(idx.clone());
            // advance to the next combination in lexicographic order
            let mut i = r;
            while i > 0 && idx[i - 1] == p - r + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..r {
                idx[j] = idx[j - 1] + 1;
            }
        }
        all
    } else {
        (0..num_samples)
            .map(|i| {
                let mut rng = rng_from_seed(derive_seed(seed, i as u64));
                let mut pool: Vec<usize> = (0..p).collect();
                for j in 0..r {
                    let t = j + rng.random_range(0..p - j);
                    pool.swap(j, t);
                }
                pool.truncate(r);
                pool
            })
            .collect()
    };
    let delta_2k = subsets
        .par_iter()
        .map(|blocks| submatrix_stat(a, partition, blocks))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(RicEstimate {
        delta_2k,
        num_samples: subsets.len(),
        admissible: delta_2k < std::f64::consts::SQRT_2 - 1.0,
    })
}

/// The RIC-based bound on `|x_hat - x|_2,q` for BBP with noise budget
/// `zeta`: `4 sqrt(1 + delta) / (1 - (1 + sqrt(2)) delta) k^(1/q - 1/2)
/// zeta`, defined for `0 < q <= 2` and `delta < sqrt(2) - 1`. Returns `None`
/// when `delta` is inadmissible (the bound does not apply).
pub fn ric_bound(delta_2k: f64, k: usize, q: QParam, zeta: f64) -> Result<Option<f64>> {
    if !(delta_2k >= 0.0) {
        return Err(Error::invalid(format!("delta={delta_2k} must be nonnegative")));
    }
    if k == 0 {
        return Err(Error::invalid("sparsity level k must be positive"));
    }
    let qv = q.value();
    if !(qv > 0.0 && qv <= 2.0) {
        return Err(Error::invalid(format!("the RIC bound needs 0 < q <= 2, got q={q}")));
    }
    if !(zeta >= 0.0) {
        return Err(Error::invalid("zeta must be nonnegative"));
    }
    if delta_2k >= std::f64::consts::SQRT_2 - 1.0 {
        return Ok(None);
    }
    let factor = 4.0 * (1.0 + delta_2k).sqrt() / (1.0 - (1.0 + std::f64::consts::SQRT_2) * delta_2k);
    Ok(Some(factor * (k as f64).powf(1.0 / qv - 0.5) * zeta))
}

/// Head-to-head record for one matrix: the BCMSV-based bound on
/// `|x_hat - x|_2,q` for BBP next to the RIC-based one.
#[derive(Debug, Clone, Copy)]
pub struct BoundComparison {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// BCMSV at the scale `min(2^(q/(q-1)) k, p)`.
    pub beta: f64,
    pub bcmsv_bound: f64,
    pub delta_2k: f64,
    /// `None` when `delta_2k` is inadmissible.
    pub ric_bound: Option<f64>,
}

/// Computes both bounds on one matrix. Needs `q` in (1, 2] so both sides are
/// defined. The BCMSV scale `2^(q/(q-1)) k` is clamped to the block count:
/// beyond that the sparsity constraint is vacuous and the level-p value
/// applies.
#[allow(clippy::too_many_arguments)]
pub fn compare_bounds(
    matrix: &MeasurementMatrix,
    partition: BlockPartition,
    k: usize,
    q: QParam,
    zeta: f64,
    bcmsv_restarts: usize,
    ric_samples: usize,
    seed: u64,
) -> Result<BoundComparison> {
    let qv = q.value();
    if !(qv > 1.0 && qv <= 2.0) {
        return Err(Error::invalid(format!(
            "the comparison needs q in (1, 2] so both bounds apply, got q={q}"
        )));
    }
    let p = partition.num_blocks();
    let s = theorem1_scale(k, q, ProgramKind::Bbp, None)?.min(p as f64);
    let problem = BcmsvProblem::new(matrix, partition, q, s)?;
    let opts = BcmsvOptions {
        restarts: bcmsv_restarts,
        seed: derive_seed(seed, 0),
        ..BcmsvOptions::default()
    };
    let beta = estimate_bcmsv(&problem, &opts)?.value;
    if !(beta > 0.0) {
        return Err(Error::Degenerate(format!(
            "BCMSV vanished at scale {s}; the BCMSV bound does not apply"
        )));
    }
    let ric = estimate_block_ric(matrix, partition, k, ric_samples, derive_seed(seed, 1))?;
    Ok(BoundComparison {
        m: matrix.num_rows(),
        n: partition.block_len(),
        k,
        beta,
        bcmsv_bound: 2.0 * zeta / beta,
        delta_2k: ric.delta_2k,
        ric_bound: ric_bound(ric.delta_2k, k, q, zeta)?,
    })
}
