//! Hermite polynomials and functions, Gauss-Hermite quadrature and the
//! velocity-space integrals of the symmetric Hermite basis.
//!
//! Conventions are the physicists' ones: `H_{k+1} = 2v H_k - 2k H_{k-1}` and
//! `phi_k(v) = exp(-v^2/2) H_k(v) / sqrt(pi^{1/2} 2^k k!)`, which makes the
//! `phi_k` orthonormal in `L^2(R)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};

const PI_QUARTER_INV: f64 = 0.751_125_544_464_942_5; // pi^{-1/4}
const RESCALE_HI: f64 = 1e150;

/// Which family of velocity basis functions the expansion uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// Orthonormal Hermite functions; yields a skew-symmetric forcing matrix.
    SymmetricHermite,
    /// `exp(-v^2) H_k(v)` weights; only used to demonstrate the instability.
    AsymmetricHermite,
}

/// Basis family, truncation size and the two dimensionless constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub n_basis: usize,
    /// Effective Planck constant.
    pub epsilon: f64,
    /// Potential strength.
    pub b_strength: f64,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, n_basis: usize, epsilon: f64, b_strength: f64) -> Result<Self> {
        if n_basis == 0 {
            return Err(invalid("n_basis", "must be at least 1"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(
                "epsilon",
                format!("must be positive, got {epsilon}"),
            ));
        }
        if !b_strength.is_finite() {
            return Err(invalid("b_strength", "must be finite"));
        }
        Ok(Self {
            family,
            n_basis,
            epsilon,
            b_strength,
        })
    }

    /// Symmetric Hermite basis with `epsilon = B = 1`.
    pub fn hermite(n_basis: usize) -> Result<Self> {
        Self::new(BasisFamily::SymmetricHermite, n_basis, 1.0, 1.0)
    }
}

/// Physicists' Hermite polynomial `H_k(v)` by the three-term recursion.
pub fn hermite_polynomial(k: usize, v: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * v;
    for j in 1..k {
        let next = 2.0 * v * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Hermite function `phi_k(v)`.
pub fn hermite_function(k: usize, v: f64) -> f64 {
    let mut out = 0.0;
    hermite_recursion(k + 1, v, |j, value| {
        if j == k {
            out = value;
        }
    });
    out
}

/// `[phi_0(v), ..., phi_{n-1}(v)]`.
pub fn hermite_functions(n: usize, v: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    hermite_functions_into(v, &mut out);
    out
}

/// Fills `out[k] = phi_k(v)` for `k < out.len()`.
pub fn hermite_functions_into(v: f64, out: &mut [f64]) {
    hermite_recursion(out.len(), v, |j, value| out[j] = value);
}

/// Runs the normalized recursion
/// `phi_{k+1} = sqrt(2/(k+1)) v phi_k - sqrt(k/(k+1)) phi_{k-1}`
/// on mantissas with a shared log scale, so neither the Gaussian factor nor
/// the polynomial growth leaves the floating-point range.
fn hermite_recursion(n: usize, v: f64, mut emit: impl FnMut(usize, f64)) {
    if n == 0 {
        return;
    }
    let mut log_scale = -0.5 * v * v;
    let mut factor = log_scale.exp();
    let scaled = |m: f64, log_scale: f64, factor: f64| {
        if factor > 1e-290 || m == 0.0 {
            m * factor
        } else {
            m.signum() * (m.abs().ln() + log_scale).exp()
        }
    };
    let mut prev = 0.0;
    let mut cur = PI_QUARTER_INV;
    emit(0, scaled(cur, log_scale, factor));
    for k in 0..n - 1 {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * v * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_HI {
            let s = cur.abs();
            cur /= s;
            prev /= s;
            log_scale += s.ln();
            factor = log_scale.exp();
        }
        emit(k + 1, scaled(cur, log_scale, factor));
    }
}

/// Gauss-Hermite rule for the weight `exp(-v^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `weights[i] * exp(nodes[i]^2)`, for integrands that carry their own
    /// Gaussian factor.
    pub scaled_weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(v_i)`, approximating `int f(v) exp(-v^2) dv`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * f(v))
            .sum()
    }

    /// Approximates `int g(v) dv` for `g = exp(-v^2) * polynomial`.
    pub fn integrate_bare(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&v, &w)| w * g(v))
            .sum()
    }
}

/// `n`-node Gauss-Hermite rule, exact for polynomials of degree `2n - 1`.
///
/// Nodes start from the eigenvalues of the Jacobi matrix (off-diagonals
/// `sqrt(k/2)`) and are polished by Newton steps on `phi_n`. Weights come from
/// the Christoffel function `1 / sum_k phi_k(v_i)^2`, which stays accurate for
/// the outermost nodes where eigenvector components underflow.
pub fn gauss_hermite(n: usize) -> Result<Quadrature> {
    if n == 0 {
        return Err(invalid("n", "quadrature needs at least one node"));
    }
    let guesses = jacobi_eigenvalues(n)?;
    let mut nodes = Vec::with_capacity(n);
    let mut phis = vec![0.0; n + 1];
    for (index, &guess) in guesses.iter().enumerate() {
        let mut v = guess;
        let mut converged = false;
        for _ in 0..50 {
            hermite_functions_into(v, &mut phis);
            let deriv = (2.0 * n as f64).sqrt() * phis[n - 1] - v * phis[n];
            if deriv == 0.0 {
                break;
            }
            let step = phis[n] / deriv;
            v -= step;
            if step.abs() <= 4.0 * f64::EPSILON * v.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged && phis[n].abs() > 1e-14 {
            return Err(Error::QuadratureNode { index, n });
        }
        nodes.push(v);
    }
    // symmetric about zero by construction
    for i in 0..n / 2 {
        let r = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -r;
        nodes[n - 1 - i] = r;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let mut weights = Vec::with_capacity(n);
    let mut scaled = Vec::with_capacity(n);
    let mut phis = vec![0.0; n];
    for &v in &nodes {
        hermite_functions_into(v, &mut phis);
        let christoffel: f64 = phis.iter().map(|p| p * p).sum();
        let s = 1.0 / christoffel;
        scaled.push(s);
        weights.push(s * (-v * v).exp());
    }
    Ok(Quadrature {
        nodes,
        weights,
        scaled_weights: scaled,
    })
}

/// Ascending eigenvalues of the `n x n` Hermite Jacobi matrix.
pub(crate) fn jacobi_eigenvalues(n: usize) -> Result<Vec<f64>> {
    let jacobi = jacobi_matrix(n);
    let eig = SymmetricEigen::try_new(jacobi, 1e-15, 10_000).ok_or(Error::EigenSolve(n))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Symmetric tridiagonal matrix with zero diagonal and `J[k][k+1] = sqrt((k+1)/2)`.
/// It is the matrix of multiplication by `v` in the Hermite function basis.
pub fn jacobi_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            (j as f64 / 2.0).sqrt()
        } else if i == j + 1 {
            (i as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    })
}

/// `int phi_k(v) v^power dv` for `k < n`, exactly.
///
/// Substituting `v = sqrt(2) u` turns `phi_k(v) v^power` into
/// `exp(-u^2)` times a polynomial of degree `k + power`.
pub fn velocity_moments(n: usize, power: usize) -> Result<Vec<f64>> {
    let quad = gauss_hermite((n + power + 2).div_ceil(2))?;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut out = vec![0.0; n];
    let mut phis = vec![0.0; n];
    for (&u, &sw) in quad.nodes.iter().zip(&quad.scaled_weights) {
        // weight w = sw exp(-u^2), and phi_k(sqrt2 u) already carries exp(-u^2)
        let v = sqrt2 * u;
        hermite_functions_into(v, &mut phis);
        let vp = v.powi(power as i32);
        for (o, p) in out.iter_mut().zip(&phis) {
            *o += sw * sqrt2 * p * vp;
        }
    }
    // odd integrands vanish exactly
    for (k, o) in out.iter_mut().enumerate() {
        if (k + power) % 2 == 1 {
            *o = 0.0;
        }
    }
    Ok(out)
}

/// `w_k = int phi_k(v) dv`; zero for odd `k`.
pub fn basis_integrals(spec: &BasisSpec) -> Result<Vec<f64>> {
    if spec.family != BasisFamily::SymmetricHermite {
        return Err(Error::UnsupportedBasis);
    }
    velocity_moments(spec.n_basis, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hermite_polynomial_small_cases() {
        assert_eq!(hermite_polynomial(0, 1.7), 1.0);
        assert_eq!(hermite_polynomial(2, 0.0), -2.0);
        // explicit H_5 = 32v^5 - 160v^3 + 120v
        let v: f64 = 0.3;
        let rodrigues = 32.0 * v.powi(5) - 160.0 * v.powi(3) + 120.0 * v;
        assert!((hermite_polynomial(5, v) - rodrigues).abs() < 1e-12);
        assert!((hermite_polynomial(5, v) - 31.75776).abs() < 1e-12);
    }

    #[test]
    fn hermite_function_references() {
        assert!((hermite_function(0, 0.0) - PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(hermite_function(1, 0.0), 0.0);
        // mpmath, 40 digits
        assert!((hermite_function(16, 2.0) - 0.088_426_707_263_713_12).abs() < 1e-12);
        assert!((hermite_function(5, 0.3) - 0.368_004_839_778_071_7).abs() < 1e-12);
        assert!((hermite_function(200, 3.0) + 0.177_045_045_016_329_2).abs() < 1e-12);
        assert!((hermite_function(150, 12.5) + 0.017_171_488_366_043_62).abs() < 1e-12);
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        for k in [0, 50, 200, 300] {
            for v in [-60.0, -25.0, 30.0, 45.0] {
                assert!(hermite_function(k, v).is_finite());
            }
        }
        assert!(hermite_function(200, 40.0).abs() < 1e-100);
    }

    #[test]
    fn parity_and_recursion_consistency() {
        for &v in &[-2.3, -0.7, 0.0, 0.4, 1.9, 3.3] {
            let phis = hermite_functions(40, v);
            let mirrored = hermite_functions(40, -v);
            for k in 0..40 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(mirrored[k], sign * phis[k]);
            }
            for k in 1..39 {
                let lhs = v * phis[k];
                let rhs = (k as f64 / 2.0).sqrt() * phis[k - 1]
                    + ((k + 1) as f64 / 2.0).sqrt() * phis[k + 1];
                assert!((lhs - rhs).abs() < 1e-12, "k={k} v={v}");
            }
        }
    }

    #[test]
    fn small_rules() {
        let q1 = gauss_hermite(1).unwrap();
        assert_eq!(q1.nodes, vec![0.0]);
        assert!((q1.weights[0] - PI.sqrt()).abs() < 1e-15);

        let q2 = gauss_hermite(2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((q2.nodes[0] + r).abs() < 1e-15 && (q2.nodes[1] - r).abs() < 1e-15);
        for w in &q2.weights {
            assert!((w - PI.sqrt() / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rule_invariants() {
        for n in [3, 7, 20, 64, 200] {
            let q = gauss_hermite(n).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            let total: f64 = q.weights.iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-13, "n={n}");
            for i in 0..n {
                assert_eq!(q.nodes[i], -q.nodes[n - 1 - i]);
            }
            assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        }
        let q20 = gauss_hermite(20).unwrap();
        let second = q20.integrate(|v| v * v);
        assert!((second - PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn nodes_are_hermite_roots() {
        let q = gauss_hermite(16).unwrap();
        for &v in &q.nodes {
            assert!(hermite_function(16, v).abs() < 1e-13);
        }
    }

    #[test]
    fn orthonormality() {
        let n = 24;
        for i in 0..n {
            for j in 0..n {
                let q = gauss_hermite((i + j + 2usize).div_ceil(2)).unwrap();
                let val = q.integrate_bare(|v| hermite_function(i, v) * hermite_function(j, v));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((val - expect).abs() < 1e-12, "i={i} j={j} val={val}");
            }
        }
    }

    #[test]
    fn basis_integrals_match_fourier_identity() {
        let spec = BasisSpec::hermite(30).unwrap();
        let w = basis_integrals(&spec).unwrap();
        assert_eq!(w[1], 0.0);
        assert!((w[0] - 1.882_792_527_553_429_6).abs() < 1e-13);
        let s2pi = (2.0 * PI).sqrt();
        for (k, wk) in w.iter().enumerate() {
            // int phi_k = sqrt(2 pi) i^k phi_k(0)
            let expect = match k % 4 {
                0 => s2pi * hermite_function(k, 0.0),
                2 => -s2pi * hermite_function(k, 0.0),
                _ => 0.0,
            };
            assert!((wk - expect).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn basis_integrals_reject_asymmetric_family() {
        let spec = BasisSpec::new(BasisFamily::AsymmetricHermite, 5, 1.0, 1.0).unwrap();
        assert!(matches!(
            basis_integrals(&spec),
            Err(Error::UnsupportedBasis)
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(BasisSpec::hermite(0).is_err());
        assert!(BasisSpec::new(BasisFamily::SymmetricHermite, 4, 0.0, 1.0).is_err());
        assert!(gauss_hermite(0).is_err());
    }
}
