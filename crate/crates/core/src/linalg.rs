//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const POWER_SEED: u64 = 0x5eed_0f_9a11;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;
const DENSE_FALLBACK_MAX: usize = 64;

/// Eigenpairs of a real symmetric matrix, ascending, with every eigenvector
/// normalized so that its largest-magnitude component is positive.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, 1e-15, 100_000).ok_or(Error::EigenSolve(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Flips `v` so its largest-magnitude component is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        v.neg_mut();
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// `max |M + M^T|`.
pub fn skew_defect(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m + m.transpose()))
}

/// `max |M^T M - I|`.
pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    max_abs(&(m.transpose() * m - DMatrix::identity(n, n)))
}

/// Spectral norm by power iteration on `M^T M` from a fixed random start.
/// Falls back to a dense symmetric eigensolve when the iteration stalls.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    v.normalize_mut();
    let mut lambda = 0.0;
    let mut converged = false;
    for _ in 0..POWER_MAX_ITER {
        let w = &gram * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            lambda = next;
            converged = true;
            break;
        }
        lambda = next;
    }
    if !converged && n <= DENSE_FALLBACK_MAX {
        if let Some(eig) = SymmetricEigen::try_new(gram.clone(), 1e-15, 100_000) {
            lambda = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        }
    }
    // one more Rayleigh quotient at the converged vector
    let w = &gram * &v;
    lambda = lambda.max(v.dot(&w));
    lambda.max(0.0).sqrt()
}

/// `exp(t M)` for real skew-symmetric `M`, through the eigendecomposition of
/// the Hermitian matrix `iM`.
pub fn skew_exponential(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let herm: DMatrix<Complex64> = m.map(|x| Complex64::new(0.0, x));
    let eig = SymmetricEigen::try_new(herm, 1e-15, 100_000).ok_or(Error::EigenSolve(n))?;
    // iM = U diag(l) U^H  =>  exp(tM) = U diag(exp(-i t l)) U^H
    let u = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        eig.eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -t * l)),
    ));
    let full = u * phases * u.adjoint();
    Ok(full.map(|z| z.re))
}

/// `out = m * x`.
#[inline]
pub fn mat_vec_into(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let n = m.nrows();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (col, &xj) in m.as_slice().chunks_exact(n).zip(x) {
        if xj == 0.0 {
            continue;
        }
        for (o, &c) in out.iter_mut().zip(col) {
            *o += c * xj;
        }
    }
}
