//! Batch experiment grids and the `bcmsv-lab` command line front end.
//!
//! Each grid command pairs a config struct (defaulting to the reference
//! experiment's parameters) with a runner that returns typed rows plus a
//! rendered CSV. Output is deterministic given the master seed: per-cell
//! seeds derive from (seed, cell index) so the worker count never changes a
//! number, floats print at 17 significant digits, and the first CSV line is a
//! `#` comment echoing the fully resolved configuration.

use std::ffi::OsString;
use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::bcmsv::{estimate_bcmsv, BcmsvOptions, BcmsvProblem};
use crate::block::{BlockPartition, BlockVector, QParam};
use crate::bounds::{
    compare_bounds, theorem1_bounds, theorem1_scale, theorem2_bounds, theorem2_scale, BoundInput,
    ProgramKind,
};
use crate::ccp::{certify_max_sparsity, CcpConfig};
use crate::ensembles::{
    gen_bernoulli, gen_gaussian, gen_hadamard_submatrix, MeasurementMatrix,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed2, rng_from_seed};
use crate::solvers::{
    residual_cone_check, solve_recovery, ConeProgram, RecoveryProblem, RecoveryProgram,
    SolveOptions,
};

/// Random matrix families the commands can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    Gaussian,
    /// Gaussian with each column rescaled to unit Euclidean norm.
    GaussianUnit,
    Bernoulli,
    Hadamard,
}

impl EnsembleKind {
    pub fn generate(self, m: usize, num_cols: usize, seed: u64) -> Result<MeasurementMatrix> {
        match self {
            EnsembleKind::Gaussian => gen_gaussian(m, num_cols, seed, false),
            EnsembleKind::GaussianUnit => gen_gaussian(m, num_cols, seed, true),
            EnsembleKind::Bernoulli => gen_bernoulli(m, num_cols, seed),
            EnsembleKind::Hadamard => gen_hadamard_submatrix(m, num_cols, seed),
        }
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(EnsembleKind::Gaussian),
            "gaussian-unit" | "gaussian_unit" => Ok(EnsembleKind::GaussianUnit),
            "bernoulli" => Ok(EnsembleKind::Bernoulli),
            "hadamard" => Ok(EnsembleKind::Hadamard),
            other => Err(Error::Parse(format!(
                "unknown ensemble {other:?}; expected gaussian, gaussian-unit, bernoulli, or hadamard"
            ))),
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EnsembleKind::Gaussian => "gaussian",
            EnsembleKind::GaussianUnit => "gaussian-unit",
            EnsembleKind::Bernoulli => "bernoulli",
            EnsembleKind::Hadamard => "hadamard",
        };
        f.write_str(name)
    }
}

/// 17-significant-digit float rendering; exact f64 round trip, byte-stable.
fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.16e}")
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn provenance(command: &str, fields: &[(&str, String)]) -> String {
    let mut line = format!("# command={command}");
    for (k, v) in fields {
        let _ = write!(line, " {k}={v}");
    }
    line.push('\n');
    line
}

fn to_qparams(values: &[f64]) -> Result<Vec<QParam>> {
    values.iter().map(|&q| QParam::new(q)).collect()
}

// ---------------------------------------------------------------------------
// table1: certified maximal sparsity grid

#[derive(Debug, Clone)]
pub struct Table1Config {
    pub ensembles: Vec<EnsembleKind>,
    pub big_n: usize,
    pub block_lens: Vec<usize>,
    pub ms: Vec<usize>,
    pub qs: Vec<QParam>,
    pub initializations: usize,
    pub seed: u64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            ensembles: vec![EnsembleKind::Bernoulli, EnsembleKind::Gaussian],
            big_n: 256,
            block_lens: vec![1, 2, 4, 8],
            ms: vec![64, 128, 192],
            qs: vec![
                QParam::Finite(2.0),
                QParam::Finite(4.0),
                QParam::Finite(16.0),
                QParam::Finite(128.0),
            ],
            initializations: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table1Row {
    pub ensemble: EnsembleKind,
    pub n: usize,
    pub m: usize,
    pub q: QParam,
    pub k_max: usize,
}

#[derive(Debug, Clone)]
pub struct Table1Report {
    pub rows: Vec<Table1Row>,
    pub csv: String,
}

/// Runs the certification grid. One matrix is drawn per (ensemble, m) pair
/// and shared across the (n, q) subgrid, mirroring how the reference table
/// reuses a draw down each column.
pub fn run_table1(config: &Table1Config) -> Result<Table1Report> {
    if config.ensembles.is_empty() || config.block_lens.is_empty() || config.ms.is_empty() || config.qs.is_empty() {
        return Err(Error::invalid("table1 grid axes must be non-empty"));
    }
    let mut matrices = Vec::new();
    for (ei, &ens) in config.ensembles.iter().enumerate() {
        for (mi, &m) in config.ms.iter().enumerate() {
            let seed = derive_seed2(config.seed, 0, (ei * config.ms.len() + mi) as u64);
            matrices.push(ens.generate(m, config.big_n, seed)?);
        }
    }
    let mut cells = Vec::new();
    for (ei, &ens) in config.ensembles.iter().enumerate() {
        for &n in &config.block_lens {
            for (mi, &m) in config.ms.iter().enumerate() {
                for &q in &config.qs {
                    cells.push((ei, mi, ens, n, m, q, cells.len()));
                }
            }
        }
    }
    let rows: Vec<Table1Row> = cells
        .par_iter()
        .map(|&(ei, mi, ens, n, m, q, idx)| {
            let matrix = &matrices[ei * config.ms.len() + mi];
            let partition = BlockPartition::from_total(config.big_n, n)?;
            let ccp = CcpConfig {
                q,
                num_initializations: config.initializations,
                seed: derive_seed2(config.seed, 1, idx as u64),
                ..CcpConfig::default()
            };
            let cert = certify_max_sparsity(matrix, partition, &ccp)?;
            Ok(Table1Row { ensemble: ens, n, m, q, k_max: cert.k_max })
        })
        .collect::<Result<_>>()?;

    let mut csv = provenance(
        "table1",
        &[
            ("ensemble", join(&config.ensembles)),
            ("N", config.big_n.to_string()),
            ("n", join(&config.block_lens)),
            ("m", join(&config.ms)),
            ("q", join(&config.qs)),
            ("inits", config.initializations.to_string()),
            ("seed", config.seed.to_string()),
        ],
    );
    csv.push_str("ensemble,n,m,q,k_max\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.ensemble, r.n, r.m, r.q, r.k_max);
    }
    Ok(Table1Report { rows, csv })
}

// ---------------------------------------------------------------------------
// table2: BCMSV grid

#[derive(Debug, Clone)]
pub struct Table2Config {
    pub ensemble: EnsembleKind,
    pub big_n: usize,
    pub block_lens: Vec<usize>,
    pub ms: Vec<usize>,
    pub qs: Vec<QParam>,
    pub ss: Vec<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for Table2Config {
    fn default() -> Self {
        Table2Config {
            ensemble: EnsembleKind::Bernoulli,
            big_n: 64,
            block_lens: vec![1, 4, 8],
            ms: vec![40, 50, 60],
            qs: vec![QParam::Finite(2.0), QParam::Finite(4.0), QParam::Finite(8.0)],
            ss: vec![2.0, 4.0, 8.0],
            restarts: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table2Row {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub q: QParam,
    pub s: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct Table2Report {
    pub rows: Vec<Table2Row>,
    pub csv: String,
}

/// Runs the BCMSV estimation grid; one matrix per (n, m) pair, shared across
/// the (q, s) subgrid.
pub fn run_table2(config: &Table2Config) -> Result<Table2Report> {
    if config.block_lens.is_empty() || config.ms.is_empty() || config.qs.is_empty() || config.ss.is_empty() {
        return Err(Error::invalid("table2 grid axes must be non-empty"));
    }
    let mut matrices = Vec::new();
    for (ni, _) in config.block_lens.iter().enumerate() {
        for (mi, &m) in config.ms.iter().enumerate() {
            let seed = derive_seed2(config.seed, 0, (ni * config.ms.len() + mi) as u64);
            matrices.push(config.ensemble.generate(m, config.big_n, seed)?);
        }
    }
    let mut cells = Vec::new();
    for (ni, &n) in config.block_lens.iter().enumerate() {
        for (mi, &m) in config.ms.iter().enumerate() {
            for &q in &config.qs {
                for &s in &config.ss {
                    cells.push((ni, mi, n, m, q, s, cells.len()));
                }
            }
        }
    }
    let rows: Vec<Table2Row> = cells
        .par_iter()
        .map(|&(ni, mi, n, m, q, s, idx)| {
            let matrix = &matrices[ni * config.ms.len() + mi];
            let partition = BlockPartition::from_total(config.big_n, n)?;
            let problem = BcmsvProblem::new(matrix, partition, q, s)?;
            let opts = BcmsvOptions {
                restarts: config.restarts,
                seed: derive_seed2(config.seed, 1, idx as u64),
                ..BcmsvOptions::default()
            };
            let est = estimate_bcmsv(&problem, &opts)?;
            Ok(Table2Row { m, n, p: partition.num_blocks(), q, s, beta: est.value })
        })
        .collect::<Result<_>>()?;

    let mut csv = provenance(
        "table2",
        &[
            ("ensemble", config.ensemble.to_string()),
            ("N", config.big_n.to_string()),
            ("n", join(&config.block_lens)),
            ("m", join(&config.ms)),
            ("q", join(&config.qs)),
            ("s", join(&config.ss)),
            ("restarts", config.restarts.to_string()),
            ("seed", config.seed.to_string()),
        ],
    );
    csv.push_str("m,n,p,q,s,beta\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.m, r.n, r.p, r.q, r.s, fmt_float(r.beta));
    }
    Ok(Table2Report { rows, csv })
}

// ---------------------------------------------------------------------------
// fig1: running minimum across restarts

#[derive(Debug, Clone)]
pub struct Fig1Config {
    pub ensemble: EnsembleKind,
    pub m: usize,
    pub big_n: usize,
    pub n: usize,
    pub s: f64,
    pub qs: Vec<QParam>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config {
            ensemble: EnsembleKind::Bernoulli,
            m: 40,
            big_n: 64,
            n: 4,
            s: 4.0,
            qs: vec![QParam::Finite(2.0), QParam::Finite(4.0), QParam::Finite(8.0)],
            restarts: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fig1Row {
    pub q: QParam,
    /// 1-based restart index.
    pub restart: usize,
    /// Objective reached by this restart.
    pub value: f64,
    pub converged: bool,
    /// Minimum objective over restarts 1..=restart.
    pub running_min: f64,
}

#[derive(Debug, Clone)]
pub struct Fig1Report {
    pub rows: Vec<Fig1Row>,
    pub csv: String,
}

/// Tracks how the multi-start estimate stabilizes: one matrix, and per q the
/// per-restart objectives with their running minimum.
pub fn run_fig1(config: &Fig1Config) -> Result<Fig1Report> {
    if config.qs.is_empty() || config.restarts == 0 {
        return Err(Error::invalid("fig1 needs at least one q and one restart"));
    }
    let matrix = config.ensemble.generate(config.m, config.big_n, derive_seed2(config.seed, 0, 0))?;
    let partition = BlockPartition::from_total(config.big_n, config.n)?;
    let mut rows = Vec::new();
    for (qi, &q) in config.qs.iter().enumerate() {
        let problem = BcmsvProblem::new(&matrix, partition, q, config.s)?;
        let opts = BcmsvOptions {
            restarts: config.restarts,
            seed: derive_seed2(config.seed, 1, qi as u64),
            ..BcmsvOptions::default()
        };
        let est = estimate_bcmsv(&problem, &opts)?;
        let mut running = f64::INFINITY;
        for (i, &value) in est.per_restart_values.iter().enumerate() {
            running = running.min(value);
            rows.push(Fig1Row {
                q,
                restart: i + 1,
                value,
                converged: est.converged[i],
                running_min: running,
            });
        }
    }
    let mut csv = provenance(
        "fig1",
        &[
            ("ensemble", config.ensemble.to_string()),
            ("m", config.m.to_string()),
            ("N", config.big_n.to_string()),
            ("n", config.n.to_string()),
            ("s", config.s.to_string()),
            ("q", join(&config.qs)),
            ("restarts", config.restarts.to_string()),
            ("seed", config.seed.to_string()),
        ],
    );
    csv.push_str("q,restart,value,converged,running_min\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.q,
            r.restart,
            fmt_float(r.value),
            r.converged,
            fmt_float(r.running_min)
        );
    }
    Ok(Fig1Report { rows, csv })
}

// ---------------------------------------------------------------------------
// fig2: BCMSV bound vs block-RIC bound

#[derive(Debug, Clone)]
pub struct Fig2Config {
    pub big_n: usize,
    pub ms: Vec<usize>,
    pub ks: Vec<usize>,
    pub block_lens: Vec<usize>,
    pub q: QParam,
    pub zeta: f64,
    pub restarts: usize,
    pub ric_samples: usize,
    pub seed: u64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Fig2Config {
            big_n: 64,
            ms: vec![16, 24, 32, 40, 48, 56, 64],
            ks: vec![1, 2, 4],
            block_lens: vec![1, 2],
            q: QParam::Finite(1.8),
            zeta: 1.0,
            restarts: 20,
            ric_samples: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fig2Row {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub q: QParam,
    pub beta: f64,
    pub bcmsv_bound: f64,
    pub delta2k: f64,
    /// `None` when the estimated constant is inadmissible.
    pub ric_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Fig2Report {
    pub rows: Vec<Fig2Row>,
    pub csv: String,
}

/// Runs the bound comparison on Hadamard submatrices; one matrix per m,
/// shared across the (k, n) subgrid. Inadmissible rows render `NA` in the
/// `ric_bound` column.
pub fn run_fig2(config: &Fig2Config) -> Result<Fig2Report> {
    if config.ms.is_empty() || config.ks.is_empty() || config.block_lens.is_empty() {
        return Err(Error::invalid("fig2 grid axes must be non-empty"));
    }
    let mut matrices = Vec::new();
    for (mi, &m) in config.ms.iter().enumerate() {
        matrices.push(gen_hadamard_submatrix(m, config.big_n, derive_seed2(config.seed, 0, mi as u64))?);
    }
    let mut cells = Vec::new();
    for (mi, &m) in config.ms.iter().enumerate() {
        for &k in &config.ks {
            for &n in &config.block_lens {
                cells.push((mi, m, k, n, cells.len()));
            }
        }
    }
    let rows: Vec<Fig2Row> = cells
        .par_iter()
        .map(|&(mi, m, k, n, idx)| {
            let partition = BlockPartition::from_total(config.big_n, n)?;
            let cmp = compare_bounds(
                &matrices[mi],
                partition,
                k,
                config.q,
                config.zeta,
                config.restarts,
                config.ric_samples,
                derive_seed2(config.seed, 1, idx as u64),
            )?;
            Ok(Fig2Row {
                m,
                k,
                n,
                q: config.q,
                beta: cmp.beta,
                bcmsv_bound: cmp.bcmsv_bound,
                delta2k: cmp.delta_2k,
                ric_bound: cmp.ric_bound,
            })
        })
        .collect::<Result<_>>()?;

    let mut csv = provenance(
        "fig2",
        &[
            ("ensemble", "hadamard".to_string()),
            ("N", config.big_n.to_string()),
            ("m", join(&config.ms)),
            ("k", join(&config.ks)),
            ("n", join(&config.block_lens)),
            ("q", config.q.to_string()),
            ("zeta", config.zeta.to_string()),
            ("restarts", config.restarts.to_string()),
            ("ric_samples", config.ric_samples.to_string()),
            ("seed", config.seed.to_string()),
        ],
    );
    csv.push_str("m,k,n,q,beta,bcmsv_bound,delta2k,ric_bound\n");
    for r in &rows {
        let ric = r.ric_bound.map_or_else(|| "NA".to_string(), fmt_float);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.m,
            r.k,
            r.n,
            r.q,
            fmt_float(r.beta),
            fmt_float(r.bcmsv_bound),
            fmt_float(r.delta2k),
            ric
        );
    }
    Ok(Fig2Report { rows, csv })
}

// ---------------------------------------------------------------------------
// verify-bounds: empirical validity harness

#[derive(Debug, Clone)]
pub struct VerifyBoundsConfig {
    /// Trials per program with exactly block sparse truths.
    pub trials_sparse: usize,
    /// Trials per program with compressible truths.
    pub trials_compressible: usize,
    /// Restarts for the one-off BCMSV estimate each suite needs.
    pub restarts: usize,
    /// Standard deviation of the Gaussian measurement noise.
    pub noise_std: f64,
    pub solver_tol: f64,
    pub seed: u64,
}

impl Default for VerifyBoundsConfig {
    fn default() -> Self {
        VerifyBoundsConfig {
            trials_sparse: 200,
            trials_compressible: 100,
            restarts: 20,
            noise_std: 0.02,
            solver_tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Sparse,
    Compressible,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Sparse => "sparse",
            Family::Compressible => "compressible",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SuiteSpec {
    family: Family,
    program: ProgramKind,
    big_n: usize,
    n: usize,
    m: usize,
    k: usize,
    q: f64,
    kappa: Option<f64>,
}

fn program_name(p: ProgramKind) -> &'static str {
    match p {
        ProgramKind::Bbp => "bbp",
        ProgramKind::Bds => "bds",
        ProgramKind::GroupLasso => "lasso",
    }
}

/// The six audited suites: three programs with exactly sparse truths, three
/// with compressible ones, shaped so the required BCMSV scale fits inside
/// the block count.
const SUITES: [SuiteSpec; 6] = [
    SuiteSpec { family: Family::Sparse, program: ProgramKind::Bbp, big_n: 64, n: 2, m: 48, k: 2, q: 2.0, kappa: None },
    SuiteSpec { family: Family::Sparse, program: ProgramKind::Bds, big_n: 64, n: 2, m: 48, k: 2, q: 2.0, kappa: None },
    SuiteSpec { family: Family::Sparse, program: ProgramKind::GroupLasso, big_n: 64, n: 2, m: 48, k: 1, q: 2.0, kappa: Some(0.5) },
    SuiteSpec { family: Family::Compressible, program: ProgramKind::Bbp, big_n: 64, n: 1, m: 56, k: 1, q: 2.0, kappa: None },
    SuiteSpec { family: Family::Compressible, program: ProgramKind::Bds, big_n: 64, n: 1, m: 56, k: 1, q: 2.0, kappa: None },
    SuiteSpec { family: Family::Compressible, program: ProgramKind::GroupLasso, big_n: 64, n: 1, m: 56, k: 1, q: 2.0, kappa: Some(0.2) },
];

#[derive(Debug, Clone)]
pub struct TrialRow {
    pub family: &'static str,
    pub program: &'static str,
    pub trial: usize,
    pub error_l2q: f64,
    pub bound_l2q: f64,
    pub slack_l2q: f64,
    pub error_l21: f64,
    pub bound_l21: f64,
    pub slack_l21: f64,
    pub cone_ok: bool,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SuiteSummary {
    pub family: &'static str,
    pub program: &'static str,
    pub trials: usize,
    pub beta: f64,
    pub scale: f64,
    pub violations: usize,
    pub cone_failures: usize,
    pub min_slack: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyBoundsReport {
    pub rows: Vec<TrialRow>,
    pub suites: Vec<SuiteSummary>,
    pub violations: usize,
    pub cone_failures: usize,
    pub nonconverged: usize,
    pub passed: bool,
    pub csv: String,
    pub summary: String,
}

fn sparse_signal(rng: &mut impl Rng, partition: BlockPartition, k: usize) -> BlockVector {
    let p = partition.num_blocks();
    let mut pool: Vec<usize> = (0..p).collect();
    for j in 0..k {
        let t = j + rng.random_range(0..p - j);
        pool.swap(j, t);
    }
    let mut values = DVector::zeros(partition.total_len());
    for &b in &pool[..k] {
        let range = partition.block_range(b);
        for i in range {
            values[i] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    BlockVector::new(values, partition).expect("constructed to match the partition")
}

/// All blocks active with norms decaying geometrically along a random block
/// order, so no sparsity level is exact but every level approximates well.
fn compressible_signal(rng: &mut impl Rng, partition: BlockPartition) -> BlockVector {
    let p = partition.num_blocks();
    let n = partition.block_len();
    let mut order: Vec<usize> = (0..p).collect();
    for j in 0..p - 1 {
        let t = j + rng.random_range(0..p - j);
        order.swap(j, t);
    }
    let mut values = DVector::zeros(partition.total_len());
    for (rank, &b) in order.iter().enumerate() {
        let mut block: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        let target = 0.5f64.powi(rank as i32);
        if norm > 0.0 {
            for v in &mut block {
                *v *= target / norm;
            }
        } else {
            block[0] = target;
        }
        let range = partition.block_range(b);
        for (i, v) in range.zip(block) {
            values[i] = v;
        }
    }
    BlockVector::new(values, partition).expect("constructed to match the partition")
}

fn blockmax(v: &DVector<f64>, partition: BlockPartition) -> f64 {
    BlockVector::new(v.clone(), partition)
        .map(|b| b.mixed_norm(QParam::Infinity))
        .unwrap_or(0.0)
}

/// Runs every suite: estimates the BCMSV once per suite at the scale its
/// theorem requires, then audits `trials` random instances against the error
/// bounds and the residual-cone conditions. A trial violates when either
/// norm's slack (bound minus measured error) drops below -1e-9.
pub fn run_verify_bounds(config: &VerifyBoundsConfig) -> Result<VerifyBoundsReport> {
    if !(config.noise_std > 0.0) {
        return Err(Error::invalid("noise level must be positive; the lasso penalty is noise-calibrated"));
    }
    let mut rows = Vec::new();
    let mut suites = Vec::new();
    for (si, spec) in SUITES.iter().enumerate() {
        let trials = match spec.family {
            Family::Sparse => config.trials_sparse,
            Family::Compressible => config.trials_compressible,
        };
        if trials == 0 {
            continue;
        }
        let q = QParam::new(spec.q)?;
        let partition = BlockPartition::from_total(spec.big_n, spec.n)?;
        let matrix = gen_gaussian(spec.m, spec.big_n, derive_seed2(config.seed, 0, si as u64), false)?;
        let scale = match spec.family {
            Family::Sparse => theorem1_scale(spec.k, q, spec.program, spec.kappa)?,
            Family::Compressible => theorem2_scale(spec.k, q, spec.program, spec.kappa)?,
        };
        let problem = BcmsvProblem::new(&matrix, partition, q, scale)?;
        let opts = BcmsvOptions {
            restarts: config.restarts,
            seed: derive_seed2(config.seed, 1, si as u64),
            ..BcmsvOptions::default()
        };
        let beta = estimate_bcmsv(&problem, &opts)?.value;
        if !(beta > 0.0) {
            return Err(Error::Degenerate(format!(
                "suite {} {} drew a matrix with vanishing BCMSV at scale {scale}",
                spec.family.name(),
                program_name(spec.program)
            )));
        }

        let suite_rows: Vec<TrialRow> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed2(config.seed, 2 + si as u64, t as u64));
                let x = match spec.family {
                    Family::Sparse => sparse_signal(&mut rng, partition, spec.k),
                    Family::Compressible => compressible_signal(&mut rng, partition),
                };
                let eps = DVector::from_fn(spec.m, |_, _| {
                    config.noise_std * rng.sample::<f64, _>(StandardNormal)
                });
                let y = matrix.entries() * x.values() + &eps;
                let at_eps = matrix.entries().transpose() * &eps;
                let (program, noise_level) = match spec.program {
                    ProgramKind::Bbp => {
                        let zeta = eps.norm();
                        (RecoveryProgram::Bbp { zeta }, zeta)
                    }
                    ProgramKind::Bds => {
                        let mu = blockmax(&at_eps, partition);
                        (RecoveryProgram::Bds { mu }, mu)
                    }
                    ProgramKind::GroupLasso => {
                        let kappa = spec.kappa.expect("lasso suites carry kappa");
                        let mu = blockmax(&at_eps, partition) / kappa;
                        (RecoveryProgram::GroupLasso { mu }, mu)
                    }
                };
                let instance = RecoveryProblem::new(&matrix, partition, y, program)?;
                let solve_opts = SolveOptions { tol: config.solver_tol, ..SolveOptions::default() };
                let result = solve_recovery(&instance, &solve_opts)?;
                let h = BlockVector::new(result.x_hat.values() - x.values(), partition)?;
                let error_l2q = h.mixed_norm(q);
                let error_l21 = h.mixed_norm(QParam::One);
                let phi = x.best_block_approx_error(spec.k)?;
                let input = BoundInput {
                    beta,
                    k: spec.k,
                    q,
                    noise_level,
                    kappa: spec.kappa,
                    phi_k: Some(phi),
                };
                let bounds = match spec.family {
                    Family::Sparse => theorem1_bounds(&input, spec.program)?,
                    Family::Compressible => theorem2_bounds(&input, spec.program)?,
                };
                let cone_ok = match spec.family {
                    Family::Sparse => {
                        let cone = match spec.program {
                            ProgramKind::Bbp => ConeProgram::Bbp,
                            ProgramKind::Bds => ConeProgram::Bds,
                            ProgramKind::GroupLasso => ConeProgram::GroupLasso {
                                kappa: spec.kappa.expect("lasso suites carry kappa"),
                            },
                        };
                        residual_cone_check(&x, &result.x_hat, spec.k, q, cone)?.inside
                    }
                    Family::Compressible => {
                        // the compressible cone condition relates the two
                        // residual norms through the approximation defect
                        let base = match spec.kappa {
                            Some(kappa) => 2.0 / (1.0 - kappa),
                            None => 2.0,
                        };
                        let rhs = base
                            * ((spec.k as f64).powf(q.one_minus_inv()?) * error_l2q + phi);
                        error_l21 <= rhs + 1e-9 * rhs.max(1.0)
                    }
                };
                Ok(TrialRow {
                    family: spec.family.name(),
                    program: program_name(spec.program),
                    trial: t,
                    error_l2q,
                    bound_l2q: bounds.l2q_bound,
                    slack_l2q: bounds.l2q_bound - error_l2q,
                    error_l21,
                    bound_l21: bounds.l21_bound,
                    slack_l21: bounds.l21_bound - error_l21,
                    cone_ok,
                    converged: result.converged,
                })
            })
            .collect::<Result<_>>()?;

        let violations = suite_rows
            .iter()
            .filter(|r| r.slack_l2q < -1e-9 || r.slack_l21 < -1e-9)
            .count();
        let cone_failures = suite_rows.iter().filter(|r| !r.cone_ok).count();
        let min_slack = suite_rows
            .iter()
            .map(|r| r.slack_l2q.min(r.slack_l21))
            .fold(f64::INFINITY, f64::min);
        suites.push(SuiteSummary {
            family: spec.family.name(),
            program: program_name(spec.program),
            trials,
            beta,
            scale,
            violations,
            cone_failures,
            min_slack,
        });
        rows.extend(suite_rows);
    }

    let violations: usize = suites.iter().map(|s| s.violations).sum();
    let cone_failures: usize = suites.iter().map(|s| s.cone_failures).sum();
    let nonconverged = rows.iter().filter(|r| !r.converged).count();
    let passed = violations == 0 && cone_failures == 0;

    let mut csv = provenance(
        "verify-bounds",
        &[
            ("trials_sparse", config.trials_sparse.to_string()),
            ("trials_compressible", config.trials_compressible.to_string()),
            ("restarts", config.restarts.to_string()),
            ("noise_std", config.noise_std.to_string()),
            ("tol", config.solver_tol.to_string()),
            ("seed", config.seed.to_string()),
        ],
    );
    for s in &suites {
        let _ = writeln!(
            csv,
            "# suite {} {}: beta={} scale={}",
            s.family,
            s.program,
            fmt_float(s.beta),
            fmt_float(s.scale)
        );
    }
    csv.push_str(
        "family,program,trial,error_l2q,bound_l2q,slack_l2q,error_l21,bound_l21,slack_l21,cone_ok,converged\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.family,
            r.program,
            r.trial,
            fmt_float(r.error_l2q),
            fmt_float(r.bound_l2q),
            fmt_float(r.slack_l2q),
            fmt_float(r.error_l21),
            fmt_float(r.bound_l21),
            fmt_float(r.slack_l21),
            r.cone_ok,
            r.converged
        );
    }

    let mut summary = String::new();
    for s in &suites {
        let _ = writeln!(
            summary,
            "{} {}: {} trials, {} violations, {} cone failures, min slack {:.3e}",
            s.family, s.program, s.trials, s.violations, s.cone_failures, s.min_slack
        );
    }
    let _ = writeln!(
        summary,
        "{}: {violations} violations, {cone_failures} cone failures, {nonconverged} non-converged solves",
        if passed { "PASS" } else { "FAIL" }
    );

    Ok(VerifyBoundsReport {
        rows,
        suites,
        violations,
        cone_failures,
        nonconverged,
        passed,
        csv,
        summary,
    })
}

// ---------------------------------------------------------------------------
// trend-m: BCMSV growth with the number of measurements

#[derive(Debug, Clone)]
pub struct TrendMConfig {
    pub ensemble: EnsembleKind,
    pub big_n: usize,
    pub n: usize,
    pub q: QParam,
    pub s: f64,
    pub ms: Vec<usize>,
    pub seeds_per_m: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for TrendMConfig {
    fn default() -> Self {
        TrendMConfig {
            ensemble: EnsembleKind::Bernoulli,
            big_n: 64,
            n: 1,
            q: QParam::Finite(2.0),
            s: 4.0,
            ms: vec![16, 32, 48, 64],
            seeds_per_m: 5,
            restarts: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrendMRow {
    pub m: usize,
    pub mean_beta: f64,
    pub min_beta: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrendMReport {
    pub rows: Vec<TrendMRow>,
    pub csv: String,
}

/// Estimates the BCMSV on fresh matrices for each m in the sweep and reports
/// the mean and minimum across draws.
pub fn run_trend_m(config: &TrendMConfig) -> Result<TrendMReport> {
    if config.ms.is_empty() || config.seeds_per_m == 0 {
        return Err(Error::invalid("trend-m needs a non-empty sweep and at least one draw per m"));
    }
    let mut cells = Vec::new();
    for (mi, &m) in config.ms.iter().enumerate() {
        for rep in 0..config.seeds_per_m {
            cells.push((mi, m, rep, cells.len()));
        }
    }
    let values: Vec<(usize, f64)> = cells
        .par_iter()
        .map(|&(mi, m, _rep, idx)| {
            let matrix = config.ensemble.generate(m, config.big_n, derive_seed2(config.seed, 0, idx as u64))?;
            let partition = BlockPartition::from_total(config.big_n, config.n)?;
            let problem = BcmsvProblem::new(&matrix, partition, config.q, config.s)?;
            let opts = BcmsvOptions {
                restarts: config.restarts,
                seed: derive_seed2(config.seed, 1, idx as u64),
                ..BcmsvOptions::default()
            };
            Ok((mi, estimate_bcmsv(&problem, &opts)?.value))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (mi, &m) in config.ms.iter().enumerate() {
        let vs: Vec<f64> = values.iter().filter(|(i, _)| *i == mi).map(|(_, v)| *v).collect();
        let mean = vs.iter().sum::<f64>() / vs.len() as f64;
        let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(TrendMRow { m, mean_beta: mean, min_beta: min, values: vs });
    }

    let mut csv = provenance(
        "trend-m",
        &[
            ("ensemble", config.ensemble.to_string()),
            ("N", config.big_n.to_string()),
            ("n", config.n.to_string()),
            ("q", config.q.to_string()),
            ("s", config.s.to_string()),
            ("m", join(&config.ms)),
            ("seeds_per_m", config.seeds_per_m.to_string()),
            ("restarts", config.restarts.to_string()),
            ("seed", config.seed.to_string()),
        ],
    );
    csv.push_str("m,mean_beta,min_beta\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{}", r.m, fmt_float(r.mean_beta), fmt_float(r.min_beta));
    }
    Ok(TrendMReport { rows, csv })
}

// ---------------------------------------------------------------------------
// single-shot reports

fn q_json(q: QParam) -> serde_json::Value {
    match q {
        QParam::Infinity => serde_json::Value::String("inf".into()),
        other => serde_json::json!(other.value()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BcmsvReport {
    pub value: f64,
    pub restarts: usize,
    pub per_restart_values: Vec<f64>,
    pub seed: u64,
    pub q: serde_json::Value,
    pub s: f64,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub elapsed_seconds: f64,
}

pub fn bcmsv_report(
    matrix: &MeasurementMatrix,
    n: usize,
    q: QParam,
    s: f64,
    opts: &BcmsvOptions,
) -> Result<BcmsvReport> {
    let partition = BlockPartition::from_total(matrix.num_cols(), n)?;
    let problem = BcmsvProblem::new(matrix, partition, q, s)?;
    let started = Instant::now();
    let est = estimate_bcmsv(&problem, opts)?;
    Ok(BcmsvReport {
        value: est.value,
        restarts: opts.restarts,
        per_restart_values: est.per_restart_values,
        seed: opts.seed,
        q: q_json(q),
        s,
        n,
        m: matrix.num_rows(),
        big_n: matrix.num_cols(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub k_max: usize,
    pub optimal_value: f64,
    pub q: serde_json::Value,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub seed: u64,
    pub iterations_used: usize,
    pub initializations: usize,
}

pub fn certify_report(
    matrix: &MeasurementMatrix,
    n: usize,
    config: &CcpConfig,
) -> Result<CertifyReport> {
    let partition = BlockPartition::from_total(matrix.num_cols(), n)?;
    let cert = certify_max_sparsity(matrix, partition, config)?;
    Ok(CertifyReport {
        k_max: cert.k_max,
        optimal_value: cert.optimal_value,
        q: q_json(config.q),
        n,
        m: matrix.num_rows(),
        big_n: matrix.num_cols(),
        seed: config.seed,
        iterations_used: cert.iterations_used,
        initializations: config.num_initializations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoverReport {
    pub program: String,
    pub m: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub objective: f64,
    pub primal_feasibility: f64,
    pub optimality_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub x_hat: Vec<f64>,
    pub objective_trace: Vec<f64>,
}

pub fn recover_report(
    matrix: &MeasurementMatrix,
    n: usize,
    y: DVector<f64>,
    program: RecoveryProgram,
    opts: &SolveOptions,
) -> Result<RecoverReport> {
    let partition = BlockPartition::from_total(matrix.num_cols(), n)?;
    let name = match program {
        RecoveryProgram::Bbp { .. } => "bbp",
        RecoveryProgram::Bds { .. } => "bds",
        RecoveryProgram::GroupLasso { .. } => "lasso",
    };
    let problem = RecoveryProblem::new(matrix, partition, y, program)?;
    let result = solve_recovery(&problem, opts)?;
    Ok(RecoverReport {
        program: name.to_string(),
        m: matrix.num_rows(),
        big_n: matrix.num_cols(),
        n,
        objective: result.objective,
        primal_feasibility: result.primal_feasibility,
        optimality_residual: result.optimality_residual,
        iterations: result.iterations,
        converged: result.converged,
        x_hat: result.x_hat.values().iter().copied().collect(),
        objective_trace: result.objective_trace,
    })
}

// ---------------------------------------------------------------------------
// command line front end

#[derive(Parser, Debug)]
#[command(name = "bcmsv-lab", version, about = "Block-sparse recovery experiment runner")]
struct Cli {
    /// JSON config file whose keys mirror the flags; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the CSV / JSON artifact here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Master seed (precedence: this flag, config file, BCMSV_LAB_SEED, 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent grid cells (first invocation wins).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Certified maximal sparsity levels over an (ensemble, n, m, q) grid.
    Table1 {
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        ensemble: Option<Vec<String>>,
        /// Random initializations per certification.
        #[arg(long)]
        inits: Option<usize>,
    },
    /// BCMSV estimates over an (n, m, q, s) grid.
    Table2 {
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        #[arg(long)]
        ensemble: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Running minimum of the estimate across restarts, per q.
    Fig1 {
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        ensemble: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// BCMSV-based vs block-RIC-based error bounds on Hadamard submatrices.
    Fig2 {
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        ric_samples: Option<usize>,
    },
    /// Audit the error bounds on random instances; exits 2 on any violation.
    VerifyBounds {
        #[arg(long)]
        trials_sparse: Option<usize>,
        #[arg(long)]
        trials_compressible: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        noise_std: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Mean and minimum BCMSV across fresh draws for each m in a sweep.
    TrendM {
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long)]
        seeds_per_m: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        ensemble: Option<String>,
    },
    /// One BCMSV estimate; emits a JSON report.
    Bcmsv {
        /// Matrix CSV to load instead of generating one.
        #[arg(long, value_name = "PATH")]
        matrix: Option<PathBuf>,
        #[arg(long)]
        ensemble: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// One maximal-sparsity certification; emits a JSON report.
    Certify {
        #[arg(long, value_name = "PATH")]
        matrix: Option<PathBuf>,
        #[arg(long)]
        ensemble: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        inits: Option<usize>,
    },
    /// Solve one recovery program from matrix and measurement files.
    Recover {
        #[arg(long, value_name = "PATH")]
        matrix: PathBuf,
        /// Measurement vector CSV (header N,n,p then one value row).
        #[arg(long, value_name = "PATH")]
        y: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        /// One of bbp, bds, lasso.
        #[arg(long)]
        program: String,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Generate a measurement matrix and emit its CSV.
    GenMatrix {
        #[arg(long)]
        ensemble: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long = "N")]
        big_n: Option<usize>,
    },
}

type JsonMap = serde_json::Map<String, serde_json::Value>;

fn cfg_get<T: DeserializeOwned>(map: &JsonMap, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::Parse(format!("config key {key:?}: {e}"))),
    }
}

fn parse_ensemble(name: Option<String>, default: EnsembleKind) -> Result<EnsembleKind> {
    match name {
        Some(s) => s.parse(),
        None => Ok(default),
    }
}

fn parse_ensembles(names: Option<Vec<String>>, default: Vec<EnsembleKind>) -> Result<Vec<EnsembleKind>> {
    match names {
        Some(list) => list.iter().map(|s| s.parse()).collect(),
        None => Ok(default),
    }
}

fn emit(output: &Option<PathBuf>, artifact: &str, what: &str) -> Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, artifact)?;
            eprintln!("wrote {what} to {}", path.display());
        }
        None => print!("{artifact}"),
    }
    Ok(())
}

fn load_or_generate(
    matrix: &Option<PathBuf>,
    ensemble: EnsembleKind,
    m: Option<usize>,
    big_n: usize,
    seed: u64,
) -> Result<MeasurementMatrix> {
    match matrix {
        Some(path) => MeasurementMatrix::from_csv(&std::fs::read_to_string(path)?),
        None => {
            let m = m.ok_or_else(|| Error::invalid("pass --matrix or --m to define the instance"))?;
            ensemble.generate(m, big_n, seed)
        }
    }
}

/// Parses and runs one invocation; returns the process exit code (0 success,
/// 1 error, 2 verify-bounds violation).
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<u8> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::invalid("--jobs must be positive"));
        }
        // only the first global-pool initialization in a process can win
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let map: JsonMap = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config file: {e}")))?;
            match value {
                serde_json::Value::Object(map) => map,
                _ => return Err(Error::Parse("config file must hold a JSON object".into())),
            }
        }
        None => JsonMap::new(),
    };
    let seed = match cli.seed.or(cfg_get(&map, "seed")?) {
        Some(s) => s,
        None => match std::env::var("BCMSV_LAB_SEED") {
            Ok(text) => text
                .parse()
                .map_err(|e| Error::Parse(format!("BCMSV_LAB_SEED={text:?}: {e}")))?,
            Err(_) => 0,
        },
    };
    let output = cli.output.or(cfg_get::<String>(&map, "output")?.map(PathBuf::from));

    match cli.command {
        Cmd::Table1 { big_n, n, m, q, ensemble, inits } => {
            let d = Table1Config::default();
            let config = Table1Config {
                ensembles: parse_ensembles(ensemble.or(cfg_get(&map, "ensemble")?), d.ensembles)?,
                big_n: big_n.or(cfg_get(&map, "N")?).unwrap_or(d.big_n),
                block_lens: n.or(cfg_get(&map, "n")?).unwrap_or(d.block_lens),
                ms: m.or(cfg_get(&map, "m")?).unwrap_or(d.ms),
                qs: match q.or(cfg_get(&map, "q")?) {
                    Some(qs) => to_qparams(&qs)?,
                    None => d.qs,
                },
                initializations: inits.or(cfg_get(&map, "inits")?).unwrap_or(d.initializations),
                seed,
            };
            let report = run_table1(&config)?;
            emit(&output, &report.csv, &format!("{} rows", report.rows.len()))?;
            Ok(0)
        }
        Cmd::Table2 { big_n, n, m, q, s, ensemble, restarts } => {
            let d = Table2Config::default();
            let config = Table2Config {
                ensemble: parse_ensemble(ensemble.or(cfg_get(&map, "ensemble")?), d.ensemble)?,
                big_n: big_n.or(cfg_get(&map, "N")?).unwrap_or(d.big_n),
                block_lens: n.or(cfg_get(&map, "n")?).unwrap_or(d.block_lens),
                ms: m.or(cfg_get(&map, "m")?).unwrap_or(d.ms),
                qs: match q.or(cfg_get(&map, "q")?) {
                    Some(qs) => to_qparams(&qs)?,
                    None => d.qs,
                },
                ss: s.or(cfg_get(&map, "s")?).unwrap_or(d.ss),
                restarts: restarts.or(cfg_get(&map, "restarts")?).unwrap_or(d.restarts),
                seed,
            };
            let report = run_table2(&config)?;
            emit(&output, &report.csv, &format!("{} rows", report.rows.len()))?;
            Ok(0)
        }
        Cmd::Fig1 { big_n, n, m, q, s, ensemble, restarts } => {
            let d = Fig1Config::default();
            let config = Fig1Config {
                ensemble: parse_ensemble(ensemble.or(cfg_get(&map, "ensemble")?), d.ensemble)?,
                m: m.or(cfg_get(&map, "m")?).unwrap_or(d.m),
                big_n: big_n.or(cfg_get(&map, "N")?).unwrap_or(d.big_n),
                n: n.or(cfg_get(&map, "n")?).unwrap_or(d.n),
                s: s.or(cfg_get(&map, "s")?).unwrap_or(d.s),
                qs: match q.or(cfg_get(&map, "q")?) {
                    Some(qs) => to_qparams(&qs)?,
                    None => d.qs,
                },
                restarts: restarts.or(cfg_get(&map, "restarts")?).unwrap_or(d.restarts),
                seed,
            };
            let report = run_fig1(&config)?;
            emit(&output, &report.csv, &format!("{} rows", report.rows.len()))?;
            Ok(0)
        }
        Cmd::Fig2 { big_n, m, k, n, q, zeta, restarts, ric_samples } => {
            let d = Fig2Config::default();
            let config = Fig2Config {
                big_n: big_n.or(cfg_get(&map, "N")?).unwrap_or(d.big_n),
                ms: m.or(cfg_get(&map, "m")?).unwrap_or(d.ms),
                ks: k.or(cfg_get(&map, "k")?).unwrap_or(d.ks),
                block_lens: n.or(cfg_get(&map, "n")?).unwrap_or(d.block_lens),
                q: match q.or(cfg_get(&map, "q")?) {
                    Some(q) => QParam::new(q)?,
                    None => d.q,
                },
                zeta: zeta.or(cfg_get(&map, "zeta")?).unwrap_or(d.zeta),
                restarts: restarts.or(cfg_get(&map, "restarts")?).unwrap_or(d.restarts),
                ric_samples: ric_samples.or(cfg_get(&map, "ric_samples")?).unwrap_or(d.ric_samples),
                seed,
            };
            let report = run_fig2(&config)?;
            emit(&output, &report.csv, &format!("{} rows", report.rows.len()))?;
            Ok(0)
        }
        Cmd::VerifyBounds { trials_sparse, trials_compressible, restarts, noise_std, tol } => {
            let d = VerifyBoundsConfig::default();
            let config = VerifyBoundsConfig {
                trials_sparse: trials_sparse
                    .or(cfg_get(&map, "trials_sparse")?)
                    .unwrap_or(d.trials_sparse),
                trials_compressible: trials_compressible
                    .or(cfg_get(&map, "trials_compressible")?)
                    .unwrap_or(d.trials_compressible),
                restarts: restarts.or(cfg_get(&map, "restarts")?).unwrap_or(d.restarts),
                noise_std: noise_std.or(cfg_get(&map, "noise_std")?).unwrap_or(d.noise_std),
                solver_tol: tol.or(cfg_get(&map, "tol")?).unwrap_or(d.solver_tol),
                seed,
            };
            let report = run_verify_bounds(&config)?;
            emit(&output, &report.csv, &format!("{} trial rows", report.rows.len()))?;
            if output.is_some() {
                print!("{}", report.summary);
            } else {
                eprint!("{}", report.summary);
            }
            Ok(if report.passed { 0 } else { 2 })
        }
        Cmd::TrendM { big_n, n, q, s, m, seeds_per_m, restarts, ensemble } => {
            let d = TrendMConfig::default();
            let config = TrendMConfig {
                ensemble: parse_ensemble(ensemble.or(cfg_get(&map, "ensemble")?), d.ensemble)?,
                big_n: big_n.or(cfg_get(&map, "N")?).unwrap_or(d.big_n),
                n: n.or(cfg_get(&map, "n")?).unwrap_or(d.n),
                q: match q.or(cfg_get(&map, "q")?) {
                    Some(q) => QParam::new(q)?,
                    None => d.q,
                },
                s: s.or(cfg_get(&map, "s")?).unwrap_or(d.s),
                ms: m.or(cfg_get(&map, "m")?).unwrap_or(d.ms),
                seeds_per_m: seeds_per_m.or(cfg_get(&map, "seeds_per_m")?).unwrap_or(d.seeds_per_m),
                restarts: restarts.or(cfg_get(&map, "restarts")?).unwrap_or(d.restarts),
                seed,
            };
            let report = run_trend_m(&config)?;
            emit(&output, &report.csv, &format!("{} rows", report.rows.len()))?;
            Ok(0)
        }
        Cmd::Bcmsv { matrix, ensemble, m, big_n, n, q, s, restarts, tol } => {
            let ens = parse_ensemble(ensemble.or(cfg_get(&map, "ensemble")?), EnsembleKind::Bernoulli)?;
            let big_n = big_n.or(cfg_get(&map, "N")?).unwrap_or(64);
            let mat = load_or_generate(
                &matrix,
                ens,
                m.or(cfg_get(&map, "m")?),
                big_n,
                derive_seed2(seed, 0, 0),
            )?;
            let n = n.or(cfg_get(&map, "n")?).unwrap_or(1);
            let q = QParam::new(q.or(cfg_get(&map, "q")?).unwrap_or(2.0))?;
            let s = s
                .or(cfg_get(&map, "s")?)
                .ok_or_else(|| Error::invalid("bcmsv needs the sparsity level --s"))?;
            let defaults = BcmsvOptions::default();
            let opts = BcmsvOptions {
                restarts: restarts.or(cfg_get(&map, "restarts")?).unwrap_or(defaults.restarts),
                tol: tol.or(cfg_get(&map, "tol")?).unwrap_or(defaults.tol),
                seed: derive_seed2(seed, 1, 0),
                ..defaults
            };
            let report = bcmsv_report(&mat, n, q, s, &opts)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
            emit(&output, &format!("{json}\n"), "bcmsv report")?;
            Ok(0)
        }
        Cmd::Certify { matrix, ensemble, m, big_n, n, q, inits } => {
            let ens = parse_ensemble(ensemble.or(cfg_get(&map, "ensemble")?), EnsembleKind::Bernoulli)?;
            let big_n = big_n.or(cfg_get(&map, "N")?).unwrap_or(64);
            let mat = load_or_generate(
                &matrix,
                ens,
                m.or(cfg_get(&map, "m")?),
                big_n,
                derive_seed2(seed, 0, 0),
            )?;
            let n = n.or(cfg_get(&map, "n")?).unwrap_or(1);
            let defaults = CcpConfig::default();
            let config = CcpConfig {
                q: QParam::new(q.or(cfg_get(&map, "q")?).unwrap_or(2.0))?,
                num_initializations: inits
                    .or(cfg_get(&map, "inits")?)
                    .unwrap_or(defaults.num_initializations),
                seed: derive_seed2(seed, 1, 0),
                ..defaults
            };
            let report = certify_report(&mat, n, &config)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
            emit(&output, &format!("{json}\n"), "certification report")?;
            Ok(0)
        }
        Cmd::Recover { matrix, y, n, program, zeta, mu, tol, max_iters } => {
            let mat = MeasurementMatrix::from_csv(&std::fs::read_to_string(&matrix)?)?;
            let y_vec = BlockVector::from_csv(&std::fs::read_to_string(&y)?)?;
            let n = n.or(cfg_get(&map, "n")?).unwrap_or(1);
            let program = match program.to_ascii_lowercase().as_str() {
                "bbp" => RecoveryProgram::Bbp { zeta: zeta.or(cfg_get(&map, "zeta")?).unwrap_or(0.0) },
                "bds" => RecoveryProgram::Bds {
                    mu: mu
                        .or(cfg_get(&map, "mu")?)
                        .ok_or_else(|| Error::invalid("bds needs the correlation budget --mu"))?,
                },
                "lasso" | "group-lasso" => RecoveryProgram::GroupLasso {
                    mu: mu
                        .or(cfg_get(&map, "mu")?)
                        .ok_or_else(|| Error::invalid("lasso needs the penalty --mu"))?,
                },
                other => {
                    return Err(Error::invalid(format!(
                        "unknown program {other:?}; expected bbp, bds, or lasso"
                    )))
                }
            };
            let defaults = SolveOptions::default();
            let opts = SolveOptions {
                tol: tol.or(cfg_get(&map, "tol")?).unwrap_or(defaults.tol),
                max_iters: max_iters.or(cfg_get(&map, "max_iters")?).unwrap_or(defaults.max_iters),
            };
            let report = recover_report(&mat, n, y_vec.into_values(), program, &opts)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
            emit(&output, &format!("{json}\n"), "recovery report")?;
            Ok(0)
        }
        Cmd::GenMatrix { ensemble, m, big_n } => {
            let ens = parse_ensemble(ensemble.or(cfg_get(&map, "ensemble")?), EnsembleKind::Bernoulli)?;
            let m = m
                .or(cfg_get(&map, "m")?)
                .ok_or_else(|| Error::invalid("gen-matrix needs the row count --m"))?;
            let big_n = big_n.or(cfg_get(&map, "N")?).unwrap_or(64);
            let matrix = ens.generate(m, big_n, seed)?;
            emit(&output, &matrix.to_csv(), &format!("{m}x{big_n} matrix"))?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table2_single_cell_is_deterministic() {
        let config = Table2Config {
            big_n: 16,
            block_lens: vec![1],
            ms: vec![12],
            qs: vec![QParam::Finite(2.0)],
            ss: vec![2.0],
            restarts: 6,
            seed: 11,
            ..Table2Config::default()
        };
        let first = run_table2(&config).unwrap();
        assert_eq!(first.rows.len(), 1);
        assert!(first.rows[0].beta > 0.0);
        assert_eq!(first.rows[0].p, 16);
        assert!(first.csv.starts_with("# command=table2 "));
        assert!(first.csv.contains("m,n,p,q,s,beta\n"));
        let second = run_table2(&config).unwrap();
        assert_eq!(first.csv, second.csv);
    }

    #[test]
    fn table1_reduced_cell_reports_a_level() {
        let config = Table1Config {
            ensembles: vec![EnsembleKind::Bernoulli],
            big_n: 16,
            block_lens: vec![1],
            ms: vec![8],
            qs: vec![QParam::Finite(2.0)],
            initializations: 4,
            seed: 3,
        };
        let report = run_table1(&config).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].k_max < 16);
        let again = run_table1(&config).unwrap();
        assert_eq!(report.csv, again.csv);
    }

    #[test]
    fn fig1_running_min_is_consistent() {
        let config = Fig1Config {
            m: 8,
            big_n: 12,
            n: 1,
            s: 2.0,
            qs: vec![QParam::Finite(2.0)],
            restarts: 5,
            seed: 1,
            ..Fig1Config::default()
        };
        let report = run_fig1(&config).unwrap();
        assert_eq!(report.rows.len(), 5);
        for pair in report.rows.windows(2) {
            assert!(pair[1].running_min <= pair[0].running_min);
        }
        let min_value = report.rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        assert_eq!(report.rows.last().unwrap().running_min, min_value);
    }

    #[test]
    fn fig2_full_hadamard_row_matches_closed_forms() {
        let config = Fig2Config {
            big_n: 8,
            ms: vec![8],
            ks: vec![1],
            block_lens: vec![1],
            q: QParam::Finite(1.8),
            restarts: 8,
            ric_samples: 30,
            seed: 2,
            ..Fig2Config::default()
        };
        let report = run_fig2(&config).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_relative_eq!(row.delta2k, 0.0, epsilon = 1e-10);
        assert_relative_eq!(row.ric_bound.unwrap(), 4.0, max_relative = 1e-10);
        assert!(row.bcmsv_bound < row.ric_bound.unwrap());
        assert!(report.csv.contains("m,k,n,q,beta,bcmsv_bound,delta2k,ric_bound\n"));
    }

    #[test]
    fn cli_gen_matrix_round_trips_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matrix.csv");
        let code = run_cli([
            "bcmsv-lab",
            "gen-matrix",
            "--ensemble",
            "gaussian",
            "--m",
            "5",
            "--N",
            "7",
            "--seed",
            "9",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let matrix = MeasurementMatrix::from_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!((matrix.num_rows(), matrix.num_cols()), (5, 7));
        assert_eq!(matrix.seed(), 9);
    }

    #[test]
    fn cli_bcmsv_emits_json_with_the_agreed_fields() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report.json");
        let code = run_cli([
            "bcmsv-lab",
            "bcmsv",
            "--ensemble",
            "bernoulli",
            "--m",
            "6",
            "--N",
            "8",
            "--n",
            "1",
            "--q",
            "2",
            "--s",
            "2",
            "--restarts",
            "4",
            "--seed",
            "5",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(json["value"].as_f64().unwrap() > 0.0);
        assert_eq!(json["per_restart_values"].as_array().unwrap().len(), 4);
        assert_eq!(json["N"], 8);
        assert_eq!(json["q"], 2.0);
    }

    #[test]
    fn cli_recover_solves_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let matrix_path = dir.path().join("matrix.csv");
        let y_path = dir.path().join("y.csv");
        let out = dir.path().join("recover.json");
        let matrix = MeasurementMatrix::from_entries(nalgebra::DMatrix::identity(4, 4), "id", 0).unwrap();
        std::fs::write(&matrix_path, matrix.to_csv()).unwrap();
        let y = BlockVector::from_slice(&[1.0, -2.0, 0.5, 0.0], BlockPartition::scalar(4).unwrap()).unwrap();
        std::fs::write(&y_path, y.to_csv()).unwrap();
        let code = run_cli([
            "bcmsv-lab",
            "recover",
            "--matrix",
            matrix_path.to_str().unwrap(),
            "--y",
            y_path.to_str().unwrap(),
            "--program",
            "bbp",
            "--zeta",
            "0",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(json["converged"].as_bool().unwrap());
        let x_hat: Vec<f64> = json["x_hat"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        for (a, b) in x_hat.iter().zip([1.0, -2.0, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn cli_rejects_unknown_flags_and_programs() {
        assert_eq!(run_cli(["bcmsv-lab", "table2", "--bogus"]), 1);
        assert_eq!(run_cli(["bcmsv-lab", "--help"]), 0);
        let dir = tempfile::tempdir().unwrap();
        let matrix_path = dir.path().join("matrix.csv");
        let y_path = dir.path().join("y.csv");
        let matrix = MeasurementMatrix::from_entries(nalgebra::DMatrix::identity(2, 2), "id", 0).unwrap();
        std::fs::write(&matrix_path, matrix.to_csv()).unwrap();
        let y = BlockVector::from_slice(&[1.0, 1.0], BlockPartition::scalar(2).unwrap()).unwrap();
        std::fs::write(&y_path, y.to_csv()).unwrap();
        let code = run_cli([
            "bcmsv-lab",
            "recover",
            "--matrix",
            matrix_path.to_str().unwrap(),
            "--y",
            y_path.to_str().unwrap(),
            "--program",
            "simplex",
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn config_file_fills_gaps_and_flags_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("config.json");
        std::fs::write(
            &cfg_path,
            r#"{"N": 8, "m": 6, "ensemble": "bernoulli", "seed": 4}"#,
        )
        .unwrap();
        let out = dir.path().join("matrix.csv");
        let code = run_cli([
            "bcmsv-lab",
            "gen-matrix",
            "--config",
            cfg_path.to_str().unwrap(),
            "--N",
            "10",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let matrix = MeasurementMatrix::from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
        // m from the file, N from the overriding flag, seed from the file
        assert_eq!((matrix.num_rows(), matrix.num_cols()), (6, 10));
        assert_eq!(matrix.seed(), 4);
    }

    #[test]
    fn trend_m_groups_draws_by_m() {
        let config = TrendMConfig {
            big_n: 10,
            n: 1,
            q: QParam::Finite(2.0),
            s: 2.0,
            ms: vec![6, 9],
            seeds_per_m: 2,
            restarts: 5,
            seed: 8,
            ..TrendMConfig::default()
        };
        let report = run_trend_m(&config).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert_eq!(row.values.len(), 2);
            assert!(row.min_beta <= row.mean_beta);
            assert!(row.min_beta > 0.0);
        }
    }
}
