//! Block structure, mixed l2/lq norms, and the q-ratio block sparsity measure.
//!
//! Signals of length `N = n * p` are split into `p` consecutive blocks of
//! equal length `n`. All sparsity notions in this crate count blocks, not
//! scalar entries.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Order parameter for mixed norms and sparsity measures.
///
/// `Finite(q)` requires `q > 0`; the limit cases `0`, `1`, and infinity get
/// their own variants because the defining expressions change form there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QParam {
    Zero,
    One,
    Finite(f64),
    Infinity,
}

impl QParam {
    /// Classifies a floating-point order, mapping `0`, `1`, and `inf` to the
    /// corresponding limit variants.
    pub fn new(q: f64) -> Result<Self> {
        if q.is_nan() || q < 0.0 {
            return Err(Error::invalid(format!("order q must be >= 0, got {q}")));
        }
        Ok(if q == 0.0 {
            QParam::Zero
        } else if q == 1.0 {
            QParam::One
        } else if q.is_infinite() {
            QParam::Infinity
        } else {
            QParam::Finite(q)
        })
    }

    /// Numeric value of the order; infinity for `Infinity`.
    pub fn value(&self) -> f64 {
        match self {
            QParam::Zero => 0.0,
            QParam::One => 1.0,
            QParam::Finite(q) => *q,
            QParam::Infinity => f64::INFINITY,
        }
    }

    /// True for orders strictly above one (the range where the q-ratio
    /// sparsity measures used by the recovery analysis are defined).
    pub fn is_above_one(&self) -> bool {
        match self {
            QParam::Zero | QParam::One => false,
            QParam::Finite(q) => *q > 1.0,
            QParam::Infinity => true,
        }
    }

    /// The exponent `q / (q - 1)`, taken as its limit `1` at `q = inf`.
    /// Only defined for orders above one.
    pub fn ratio_exponent(&self) -> Result<f64> {
        match self {
            QParam::Finite(q) if *q > 1.0 => Ok(q / (q - 1.0)),
            QParam::Infinity => Ok(1.0),
            other => Err(Error::invalid(format!(
                "exponent q/(q-1) needs q > 1, got {other}"
            ))),
        }
    }

    /// The exponent `1 - 1/q`, taken as its limit `1` at `q = inf`.
    /// Only defined for orders above one.
    pub fn one_minus_inv(&self) -> Result<f64> {
        match self {
            QParam::Finite(q) if *q > 1.0 => Ok(1.0 - 1.0 / q),
            QParam::Infinity => Ok(1.0),
            other => Err(Error::invalid(format!(
                "exponent 1-1/q needs q > 1, got {other}"
            ))),
        }
    }
}

impl fmt::Display for QParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QParam::Zero => write!(f, "0"),
            QParam::One => write!(f, "1"),
            QParam::Finite(q) => write!(f, "{q}"),
            QParam::Infinity => write!(f, "inf"),
        }
    }
}

/// Equal-length block layout of a signal: `p` blocks of length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPartition {
    block_len: usize,
    num_blocks: usize,
}

impl BlockPartition {
    pub fn new(block_len: usize, num_blocks: usize) -> Result<Self> {
        if block_len == 0 || num_blocks == 0 {
            return Err(Error::invalid(format!(
                "partition needs positive block length and count, got n={block_len}, p={num_blocks}"
            )));
        }
        Ok(BlockPartition {
            block_len,
            num_blocks,
        })
    }

    /// Partition with scalar blocks (`n = 1`), the plain sparse-vector case.
    pub fn scalar(total_len: usize) -> Result<Self> {
        BlockPartition::new(1, total_len)
    }

    /// Splits `total_len` into blocks of length `block_len`; errors when the
    /// length is not an exact multiple.
    pub fn from_total(total_len: usize, block_len: usize) -> Result<Self> {
        if block_len == 0 || total_len == 0 || !total_len.is_multiple_of(block_len) {
            return Err(Error::invalid(format!(
                "total length {total_len} is not a positive multiple of block length {block_len}"
            )));
        }
        BlockPartition::new(block_len, total_len / block_len)
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn total_len(&self) -> usize {
        self.block_len * self.num_blocks
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        debug_assert!(i < self.num_blocks);
        i * self.block_len..(i + 1) * self.block_len
    }
}

/// A signal together with its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    values: DVector<f64>,
    partition: BlockPartition,
}

impl BlockVector {
    pub fn new(values: DVector<f64>, partition: BlockPartition) -> Result<Self> {
        if values.len() != partition.total_len() {
            return Err(Error::dims(format!(
                "vector length {} does not match partition total {}",
                values.len(),
                partition.total_len()
            )));
        }
        Ok(BlockVector { values, partition })
    }

    pub fn from_slice(values: &[f64], partition: BlockPartition) -> Result<Self> {
        BlockVector::new(DVector::from_row_slice(values), partition)
    }

    pub fn zeros(partition: BlockPartition) -> Self {
        BlockVector {
            values: DVector::zeros(partition.total_len()),
            partition,
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn partition(&self) -> BlockPartition {
        self.partition
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn block(&self, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.values.rows(
            i * self.partition.block_len(),
            self.partition.block_len(),
        )
    }

    /// Euclidean norms of the blocks, in block order.
    pub fn block_norms(&self) -> Vec<f64> {
        block_norms_of(&self.values, self.partition)
    }

    /// Mixed l2/lq norm: the lq norm (or quasi-norm, count, max) of the
    /// vector of block l2 norms.
    pub fn mixed_norm(&self, q: QParam) -> f64 {
        mixed_norm_of_block_norms(&self.block_norms(), q)
    }

    /// The q-ratio block sparsity `k_q(x)`: an effective count of active
    /// blocks, equal to `(|x|_{2,1} / |x|_{2,q})^{q/(q-1)}` for finite
    /// `q != 1` and to the stated limits at `q = 0, 1, inf`. The zero vector
    /// reports 0 for every order.
    pub fn q_ratio_sparsity(&self, q: QParam) -> f64 {
        let norms = self.block_norms();
        q_ratio_from_block_norms(&norms, q)
    }

    /// Tail after the best block-k-term approximation: the sum of the
    /// `p - k` smallest block norms. This is the sparsity defect that shows
    /// up in the compressible-signal error bounds.
    pub fn best_block_approx_error(&self, k: usize) -> Result<f64> {
        let p = self.partition.num_blocks();
        if k > p {
            return Err(Error::invalid(format!(
                "approximation level k={k} exceeds block count p={p}"
            )));
        }
        let mut norms = self.block_norms();
        norms.sort_by(|a, b| a.total_cmp(b));
        Ok(norms[..p - k].iter().sum())
    }

    /// Copy of the signal with all blocks outside `support` zeroed.
    pub fn restrict_to_support(&self, support: &BlockSupport) -> Result<Self> {
        if support.num_blocks() != self.partition.num_blocks() {
            return Err(Error::dims(format!(
                "support over {} blocks applied to a vector with {} blocks",
                support.num_blocks(),
                self.partition.num_blocks()
            )));
        }
        let mut out = DVector::zeros(self.values.len());
        for &i in support.indices() {
            let r = self.partition.block_range(i);
            out.rows_mut(r.start, self.partition.block_len())
                .copy_from(&self.values.rows(r.start, self.partition.block_len()));
        }
        Ok(BlockVector {
            values: out,
            partition: self.partition,
        })
    }

    /// Serializes to CSV: one line `N,n,p`, then one line with the `N`
    /// entries printed at 17 significant digits (exact f64 round trip).
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "{},{},{}\n",
            self.partition.total_len(),
            self.partition.block_len(),
            self.partition.num_blocks()
        );
        let row: Vec<String> = self.values.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty vector CSV".into()))?;
        let dims: Vec<usize> = header
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad vector CSV header field {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let [total, n, p] = dims[..] else {
            return Err(Error::Parse(format!(
                "vector CSV header needs 3 fields N,n,p, got {}",
                dims.len()
            )));
        };
        if total != n * p {
            return Err(Error::Parse(format!(
                "vector CSV header inconsistent: N={total} but n*p={}",
                n * p
            )));
        }
        let row = lines
            .next()
            .ok_or_else(|| Error::Parse("vector CSV missing value row".into()))?;
        let values: Vec<f64> = row
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad vector CSV value {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != total {
            return Err(Error::Parse(format!(
                "vector CSV has {} values, header says {total}",
                values.len()
            )));
        }
        BlockVector::from_slice(&values, BlockPartition::new(n, p)?)
    }
}

/// Block norms of a raw vector under a partition. Internal building block
/// shared by the solvers, which work on `DVector` directly.
pub(crate) fn block_norms_of(values: &DVector<f64>, partition: BlockPartition) -> Vec<f64> {
    let n = partition.block_len();
    (0..partition.num_blocks())
        .map(|i| {
            let block = values.rows(i * n, n);
            // Factor out the largest magnitude so squaring entries near the
            // extremes of the f64 range neither underflows nor overflows.
            let amax = block.amax();
            if amax == 0.0 {
                0.0
            } else {
                amax * block.map(|v| (v / amax).powi(2)).sum().sqrt()
            }
        })
        .collect()
}

/// lq norm (or count/max) of a vector of nonnegative block norms.
///
/// Finite orders are evaluated with the largest entry factored out, so large
/// `q` neither overflows nor underflows.
pub(crate) fn mixed_norm_of_block_norms(norms: &[f64], q: QParam) -> f64 {
    match q {
        QParam::Zero => norms.iter().filter(|&&b| b > 0.0).count() as f64,
        QParam::One => norms.iter().sum(),
        QParam::Infinity => norms.iter().cloned().fold(0.0, f64::max),
        QParam::Finite(q) => {
            let max = norms.iter().cloned().fold(0.0, f64::max);
            if max == 0.0 {
                return 0.0;
            }
            let sum: f64 = norms
                .iter()
                .filter(|&&b| b > 0.0)
                .map(|&b| ((b / max).ln() * q).exp())
                .sum();
            max * (sum.ln() / q).exp()
        }
    }
}

pub(crate) fn q_ratio_from_block_norms(norms: &[f64], q: QParam) -> f64 {
    let l1 = mixed_norm_of_block_norms(norms, QParam::One);
    if l1 == 0.0 {
        return 0.0;
    }
    match q {
        QParam::Zero => norms.iter().filter(|&&b| b > 0.0).count() as f64,
        QParam::One => {
            // Limit q -> 1: exponential of the Shannon entropy of the block
            // norm distribution pi_i = b_i / |x|_{2,1}.
            let h: f64 = norms
                .iter()
                .filter(|&&b| b > 0.0)
                .map(|&b| {
                    let pi = b / l1;
                    -pi * pi.ln()
                })
                .sum();
            h.exp()
        }
        QParam::Infinity => l1 / mixed_norm_of_block_norms(norms, QParam::Infinity),
        QParam::Finite(qv) => {
            let lq = mixed_norm_of_block_norms(norms, q);
            // Log-domain form of (l1/lq)^{q/(q-1)}; stable for q near 1 and
            // for very large q.
            ((qv / (qv - 1.0)) * (l1.ln() - lq.ln())).exp()
        }
    }
}

/// Stable gradient of the mixed l2/lq norm at `values` (orders above one).
///
/// For finite q the block-i slice is `t_i^{q-2} * x_i / |x|_{2,q}` with
/// `t_i = b_i / |x|_{2,q} <= 1`, evaluated in log domain; blocks with zero
/// norm get the zero subgradient. For q = inf it returns the subgradient
/// supported on the first largest block. Returns zero at the zero vector.
pub(crate) fn mixed_norm_gradient(
    values: &DVector<f64>,
    partition: BlockPartition,
    q: QParam,
) -> DVector<f64> {
    let norms = block_norms_of(values, partition);
    let n = partition.block_len();
    let mut grad = DVector::zeros(values.len());
    match q {
        QParam::Infinity => {
            let mut best = 0usize;
            let mut best_norm = 0.0f64;
            for (i, &b) in norms.iter().enumerate() {
                if b > best_norm {
                    best_norm = b;
                    best = i;
                }
            }
            if best_norm > 0.0 {
                let r = partition.block_range(best);
                for j in r {
                    grad[j] = values[j] / best_norm;
                }
            }
        }
        QParam::Finite(qv) if qv > 1.0 => {
            let total = mixed_norm_of_block_norms(&norms, q);
            if total == 0.0 {
                return grad;
            }
            for (i, &b) in norms.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let t = (b / total).min(1.0);
                // blockwise gradient norm is t^(q-1), vanishing as t -> 0;
                // skip ratios so small that the t^(q-2) factor would overflow
                if t < 1e-200 {
                    continue;
                }
                let coef = ((qv - 2.0) * t.ln()).exp() / total;
                if coef == 0.0 {
                    continue;
                }
                for j in i * n..(i + 1) * n {
                    grad[j] = coef * values[j];
                }
            }
        }
        _ => unreachable!("mixed_norm_gradient requires q > 1"),
    }
    grad
}

/// Set of active block indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSupport {
    indices: BTreeSet<usize>,
    num_blocks: usize,
}

impl BlockSupport {
    pub fn new(indices: impl IntoIterator<Item = usize>, num_blocks: usize) -> Result<Self> {
        let indices: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&i| i >= num_blocks) {
            return Err(Error::invalid(format!(
                "block index {bad} out of range for p={num_blocks}"
            )));
        }
        Ok(BlockSupport {
            indices,
            num_blocks,
        })
    }

    /// Indices of the blocks with nonzero norm.
    pub fn of(x: &BlockVector) -> Self {
        let norms = x.block_norms();
        BlockSupport {
            indices: norms
                .iter()
                .enumerate()
                .filter(|(_, &b)| b > 0.0)
                .map(|(i, _)| i)
                .collect(),
            num_blocks: x.partition().num_blocks(),
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = &usize> {
        self.indices.iter()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }
}
