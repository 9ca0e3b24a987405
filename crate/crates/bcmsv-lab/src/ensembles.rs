//! Seeded measurement-matrix ensembles.
//!
//! Three ensembles are provided: Gaussian with entry variance 1/m (optionally
//! column-normalized), symmetric Bernoulli with entries +-1/sqrt(m), and rows
//! of a Sylvester Hadamard matrix picked by a seeded permutation. Generation
//! is bit-deterministic per seed: entries are drawn row by row, left to
//! right, from a ChaCha8 stream, and the result never depends on thread
//! count.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// A measurement matrix with its provenance (ensemble label and seed).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    entries: DMatrix<f64>,
    label: String,
    seed: u64,
}

impl MeasurementMatrix {
    /// Wraps externally supplied entries. The label records where they came
    /// from; it must not contain commas (it is a CSV header field).
    pub fn from_entries(entries: DMatrix<f64>, label: impl Into<String>, seed: u64) -> Result<Self> {
        let label = label.into();
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::invalid("matrix must have positive dimensions"));
        }
        if label.contains(',') || label.is_empty() {
            return Err(Error::invalid(format!(
                "ensemble label must be nonempty and comma-free, got {label:?}"
            )));
        }
        Ok(MeasurementMatrix {
            entries,
            label,
            seed,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Number of measurements m.
    pub fn num_rows(&self) -> usize {
        self.entries.nrows()
    }

    /// Signal dimension N.
    pub fn num_cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn ensemble_label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// CSV form: first line `m,N,ensemble_label,seed`, then one line per row
    /// with entries at 17 significant digits (exact f64 round trip).
    pub fn to_csv(&self) -> String {
        let (m, n) = (self.num_rows(), self.num_cols());
        let mut out = format!("{},{},{},{}\n", m, n, self.label, self.seed);
        for i in 0..m {
            let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", self.entries[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix CSV".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "matrix CSV header needs 4 fields m,N,ensemble_label,seed, got {}",
                fields.len()
            )));
        }
        let m: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad row count {:?}: {e}", fields[0])))?;
        let n: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad column count {:?}: {e}", fields[1])))?;
        let label = fields[2].trim().to_string();
        let seed: u64 = fields[3]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad seed {:?}: {e}", fields[3])))?;
        let mut entries = DMatrix::zeros(m, n);
        for i in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("matrix CSV ends after {i} of {m} rows")))?;
            let row: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad matrix entry {t:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "matrix CSV row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                entries[(i, j)] = v;
            }
        }
        MeasurementMatrix::from_entries(entries, label, seed)
    }
}

/// Gaussian ensemble: i.i.d. N(0, 1/m) entries. With `unit_columns` each
/// column is rescaled to unit Euclidean norm afterwards (label suffix
/// `-unit`).
pub fn gen_gaussian(m: usize, num_cols: usize, seed: u64, unit_columns: bool) -> Result<MeasurementMatrix> {
    check_dims(m, num_cols)?;
    let mut rng = rng_from_seed(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let mut entries = DMatrix::zeros(m, num_cols);
    for i in 0..m {
        for j in 0..num_cols {
            let g: f64 = rng.sample(StandardNormal);
            entries[(i, j)] = g * scale;
        }
    }
    let mat = MeasurementMatrix {
        entries,
        label: "gaussian".into(),
        seed,
    };
    if unit_columns {
        unit_normalize_columns(&mat)
    } else {
        Ok(mat)
    }
}

/// Symmetric Bernoulli ensemble: i.i.d. entries +-1/sqrt(m) with equal
/// probability. Columns have unit norm by construction.
pub fn gen_bernoulli(m: usize, num_cols: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(m, num_cols)?;
    let mut rng = rng_from_seed(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let mut entries = DMatrix::zeros(m, num_cols);
    for i in 0..m {
        for j in 0..num_cols {
            entries[(i, j)] = if rng.random::<bool>() { scale } else { -scale };
        }
    }
    Ok(MeasurementMatrix {
        entries,
        label: "bernoulli".into(),
        seed,
    })
}

/// Partial Hadamard ensemble: the first `m` rows of a seeded random row
/// permutation of the Sylvester Hadamard matrix of order `num_cols`, scaled
/// by 1/sqrt(m). Requires `num_cols` to be a power of two and `m <= num_cols`.
pub fn gen_hadamard_submatrix(m: usize, num_cols: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(m, num_cols)?;
    if !num_cols.is_power_of_two() {
        return Err(Error::invalid(format!(
            "Hadamard order must be a power of two, got {num_cols}"
        )));
    }
    if m > num_cols {
        return Err(Error::invalid(format!(
            "Hadamard submatrix cannot have more rows ({m}) than the full order ({num_cols})"
        )));
    }
    // Sylvester doubling over sign patterns.
    let mut h = vec![vec![1i8]];
    while h.len() < num_cols {
        let k = h.len();
        let mut next = vec![vec![0i8; 2 * k]; 2 * k];
        for i in 0..k {
            for j in 0..k {
                next[i][j] = h[i][j];
                next[i][j + k] = h[i][j];
                next[i + k][j] = h[i][j];
                next[i + k][j + k] = -h[i][j];
            }
        }
        h = next;
    }
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..num_cols).collect();
    perm.shuffle(&mut rng);
    let scale = 1.0 / (m as f64).sqrt();
    let mut entries = DMatrix::zeros(m, num_cols);
    for (i, &row) in perm[..m].iter().enumerate() {
        for j in 0..num_cols {
            entries[(i, j)] = f64::from(h[row][j]) * scale;
        }
    }
    Ok(MeasurementMatrix {
        entries,
        label: "hadamard".into(),
        seed,
    })
}

/// Rescales every column to unit Euclidean norm, appending `-unit` to the
/// label (unless already present). Errors on a zero column.
pub fn unit_normalize_columns(matrix: &MeasurementMatrix) -> Result<MeasurementMatrix> {
    let mut entries = matrix.entries.clone();
    for j in 0..entries.ncols() {
        let norm = entries.column(j).norm();
        if norm < 1e-300 {
            return Err(Error::Degenerate(format!(
                "column {j} has zero norm, cannot normalize"
            )));
        }
        entries.column_mut(j).scale_mut(1.0 / norm);
    }
    let label = if matrix.label.ends_with("-unit") {
        matrix.label.clone()
    } else {
        format!("{}-unit", matrix.label)
    };
    Ok(MeasurementMatrix {
        entries,
        label,
        seed: matrix.seed,
    })
}

fn check_dims(m: usize, num_cols: usize) -> Result<()> {
    if m == 0 || num_cols == 0 {
        return Err(Error::invalid(format!(
            "matrix dimensions must be positive, got {m} x {num_cols}"
        )));
    }
    Ok(())
}
