//! Dense linear-algebra helpers shared across modules: spectral norm by
//! power iteration, an orthonormal kernel basis, and singular-value extremes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Spectral norm of `a` by power iteration on the Gram operator, to a 1e-10
/// relative eigenvalue tolerance. Deterministic: the start vector comes from
/// a fixed internal seed.
pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    let mut rng = rng_from_seed(0x5bec_74a1);
    let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut norm_v = v.norm();
    if norm_v == 0.0 {
        v[0] = 1.0;
        norm_v = 1.0;
    }
    v /= norm_v;
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        let w = a.transpose() * (a * &v);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        let next = &w / wn;
        let new_lambda = v.dot(&w);
        let done = (new_lambda - lambda).abs() <= 1e-10 * new_lambda.abs().max(1e-300);
        v = next;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda.max(0.0).sqrt()
}

/// Smallest and largest singular values of `a`.
pub(crate) fn singular_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let sv = a.clone().singular_values();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for v in sv.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

/// Orthonormal basis of the kernel of a matrix.
#[derive(Debug, Clone)]
pub(crate) struct KernelBasis {
    /// N x d with orthonormal columns spanning ker(A); empty when trivial.
    basis: DMatrix<f64>,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projection of `v` onto the kernel.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.dim() == 0 {
            return DVector::zeros(self.ambient_dim());
        }
        &self.basis * (self.basis.transpose() * v)
    }

    /// Maps kernel coordinates to an ambient vector.
    pub fn lift(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.basis * w
    }
}

/// Computes an orthonormal kernel basis by a rank-revealing orthogonalization
/// of the rows of `a`, then completing to the orthogonal complement. Rows
/// whose residual falls below `1e-10 * sigma_max` are treated as dependent.
pub(crate) fn kernel_basis(a: &DMatrix<f64>) -> Result<KernelBasis> {
    let n = a.ncols();
    let sigma_max = spectral_norm(a);
    if sigma_max == 0.0 {
        return Ok(KernelBasis {
            basis: DMatrix::identity(n, n),
        });
    }
    let tol = 1e-10 * sigma_max;

    // Pivoted modified Gram-Schmidt over the rows: always peel off the row
    // with the largest remaining residual.
    let mut work: Vec<DVector<f64>> = (0..a.nrows()).map(|i| a.row(i).transpose()).collect();
    let mut row_basis: Vec<DVector<f64>> = Vec::new();
    loop {
        let (best, best_norm) = work
            .iter()
            .enumerate()
            .map(|(i, w)| (i, w.norm()))
            .fold((usize::MAX, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == usize::MAX || best_norm <= tol {
            break;
        }
        let v = work.swap_remove(best) / best_norm;
        for w in &mut work {
            let c = v.dot(w);
            w.axpy(-c, &v, 1.0);
        }
        row_basis.push(v);
    }
    let rank = row_basis.len();
    let dim = n - rank;
    if dim == 0 {
        return Ok(KernelBasis {
            basis: DMatrix::zeros(n, 0),
        });
    }

    // Complete to an orthonormal basis of the complement, starting from the
    // coordinate directions and reorthogonalizing twice for stability.
    let mut kernel: Vec<DVector<f64>> = Vec::with_capacity(dim);
    let mut candidates: Vec<DVector<f64>> = (0..n)
        .map(|j| {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            e
        })
        .collect();
    for v in &row_basis {
        for c in &mut candidates {
            let t = v.dot(c);
            c.axpy(-t, v, 1.0);
        }
    }
    while kernel.len() < dim {
        let (best, best_norm) = candidates
            .iter()
            .enumerate()
            .map(|(i, w)| (i, w.norm()))
            .fold((usize::MAX, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == usize::MAX || best_norm <= 1e-12 {
            return Err(Error::Degenerate(
                "kernel completion ran out of independent directions".into(),
            ));
        }
        let mut v = candidates.swap_remove(best);
        // second reorthogonalization pass against both sets
        for b in row_basis.iter().chain(kernel.iter()) {
            let t = b.dot(&v);
            v.axpy(-t, b, 1.0);
        }
        let nv = v.norm();
        if nv <= 1e-12 {
            continue;
        }
        v /= nv;
        for c in &mut candidates {
            let t = v.dot(c);
            c.axpy(-t, &v, 1.0);
        }
        kernel.push(v);
    }
    let basis = DMatrix::from_columns(&kernel);
    Ok(KernelBasis { basis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = rng_from_seed(11);
        let a = DMatrix::from_fn(8, 13, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (_, hi) = singular_extremes(&a);
        assert_relative_eq!(spectral_norm(&a), hi, max_relative = 1e-8);
        // exact power-of-two scaling
        let a2 = &a * 2.0;
        assert_eq!(spectral_norm(&a2), 2.0 * spectral_norm(&a));
    }

    #[test]
    fn kernel_basis_is_orthonormal_and_annihilated() {
        let mut rng = rng_from_seed(23);
        let a = DMatrix::from_fn(5, 12, |_, _| rng.sample::<f64, _>(StandardNormal));
        let k = kernel_basis(&a).unwrap();
        assert_eq!(k.dim(), 7);
        let gram = k.basis.transpose() * &k.basis;
        for i in 0..7 {
            for j in 0..7 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(gram[(i, j)], expect, epsilon = 1e-12);
            }
        }
        let image = &a * &k.basis;
        assert!(image.amax() < 1e-12);
        // projection fixes kernel vectors and kills row-space vectors
        let z = k.lift(&DVector::from_fn(7, |i, _| (i + 1) as f64));
        let pz = k.project(&z);
        assert_relative_eq!((&pz - &z).norm(), 0.0, epsilon = 1e-10);
        let r = a.row(0).transpose();
        assert!(k.project(&r).norm() < 1e-10);
    }

    #[test]
    fn kernel_of_square_invertible_is_trivial() {
        let a = DMatrix::<f64>::identity(6, 6) * 3.0;
        let k = kernel_basis(&a).unwrap();
        assert_eq!(k.dim(), 0);
    }

    #[test]
    fn kernel_detects_dependent_rows() {
        // rank-1 matrix: two proportional rows
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let k = kernel_basis(&a).unwrap();
        assert_eq!(k.dim(), 2);
        assert!((&a * &k.basis).amax() < 1e-12);
    }
}
