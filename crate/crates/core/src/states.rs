//! Wave states in the harmonic-oscillator eigenbasis, their Wigner functions,
//! and the initial coefficient fields they induce.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{
    gauss_hermite, hermite_function, hermite_functions_into, BasisFamily, BasisSpec,
};
use crate::dynamics::CoefficientField;
use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::linalg::sorted_symmetric_eigen;

const INITIAL_IMAG_TOL: f64 = 1e-10;
const TRANSFORM_IMAG_TOL: f64 = 1e-9;
const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// `Psi_n(x)`, the harmonic-oscillator eigenfunction; the same function as `phi_n`.
pub fn harmonic_eigenfunction(n: usize, x: f64) -> f64 {
    hermite_function(n, x)
}

/// `E_n = n + 1/2`.
pub fn harmonic_energy(n: usize) -> f64 {
    n as f64 + 0.5
}

/// Position operator in the harmonic eigenbasis, `n x n`.
pub fn position_matrix(n: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, n);
    for k in 1..n {
        let e = (k as f64 / 2.0).sqrt();
        x[(k - 1, k)] = e;
        x[(k, k - 1)] = e;
    }
    x
}

/// `H = diag(n + 1/2) + (c - 1/2) X^2 + K X^4` on the first `n_b` eigenstates.
///
/// The powers of `X` are formed on a larger space and then cut, so every
/// entry equals the untruncated matrix element.
pub fn hamiltonian_matrix(c: f64, k: f64, n_b: usize) -> Result<DMatrix<f64>> {
    if n_b < 2 {
        return Err(invalid(
            "n_b",
            format!("need at least 2 basis states, got {n_b}"),
        ));
    }
    let x = position_matrix(n_b + 4);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let mut h = DMatrix::zeros(n_b, n_b);
    for i in 0..n_b {
        for j in 0..n_b {
            h[(i, j)] = (c - 0.5) * x2[(i, j)] + k * x4[(i, j)];
        }
        h[(i, i)] += harmonic_energy(i);
    }
    // products of a symmetric tridiagonal matrix are symmetric up to rounding
    let h = (&h + h.transpose()) * 0.5;
    Ok(h)
}

/// One term `amplitude * e^{-i E t} * sum_k coeffs[k] Psi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub amplitude: Complex64,
    pub coeffs: Vec<f64>,
    pub energy: Option<f64>,
}

/// Normalized state `Psi(t) = sum_modes amplitude e^{-i E t} sum_k c_k Psi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    modes: Vec<Mode>,
    n_b: usize,
}

impl WaveState {
    /// Rescales the amplitudes so that the harmonic coefficients have unit norm.
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(invalid("modes", "a state needs at least one mode"));
        }
        let n_b = modes.iter().map(|m| m.coeffs.len()).max().unwrap_or(0);
        if n_b == 0 {
            return Err(invalid("modes", "modes have no coefficients"));
        }
        let mut state = Self { modes, n_b };
        let norm = state
            .coeffs_with(|_| Ok(Complex64::new(1.0, 0.0)))?
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(invalid("modes", "state has zero or non-finite norm"));
        }
        for m in &mut state.modes {
            m.amplitude /= norm;
        }
        Ok(state)
    }

    /// Superposition of harmonic eigenstates, `(index, weight)` pairs.
    pub fn harmonic(terms: &[(usize, Complex64)]) -> Result<Self> {
        let n_b = terms.iter().map(|t| t.0 + 1).max().unwrap_or(0);
        let modes = terms
            .iter()
            .map(|&(n, amplitude)| {
                let mut coeffs = vec![0.0; n_b];
                coeffs[n] = 1.0;
                Mode {
                    amplitude,
                    coeffs,
                    energy: Some(harmonic_energy(n)),
                }
            })
            .collect();
        Self::new(modes)
    }

    /// Superposition of numerically computed eigenstates.
    pub fn from_eigen(result: &EigenResult, terms: &[(usize, Complex64)]) -> Result<Self> {
        let modes = terms
            .iter()
            .map(|&(n, amplitude)| {
                let col = result.vectors.get(n).ok_or_else(|| {
                    invalid(
                        "index",
                        format!(
                            "eigenstate {n} not computed (have {})",
                            result.vectors.len()
                        ),
                    )
                })?;
                Ok(Mode {
                    amplitude,
                    coeffs: col.clone(),
                    energy: Some(result.energies[n]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(modes)
    }

    /// Static state given directly by harmonic coefficients.
    pub fn from_coefficients(coeffs: &[Complex64]) -> Result<Self> {
        let modes = vec![
            Mode {
                amplitude: Complex64::new(1.0, 0.0),
                coeffs: coeffs.iter().map(|c| c.re).collect(),
                energy: None,
            },
            Mode {
                amplitude: Complex64::new(0.0, 1.0),
                coeffs: coeffs.iter().map(|c| c.im).collect(),
                energy: None,
            },
        ];
        Self::new(modes)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Number of harmonic eigenstates spanned.
    pub fn n_basis(&self) -> usize {
        self.n_b
    }

    pub fn has_energies(&self) -> bool {
        self.modes.iter().all(|m| m.energy.is_some())
    }

    /// Harmonic expansion coefficients at time `t`.
    pub fn harmonic_coeffs(&self, t: f64) -> Result<Vec<Complex64>> {
        self.coeffs_with(|m| {
            if t == 0.0 {
                return Ok(Complex64::new(1.0, 0.0));
            }
            let e = m.energy.ok_or(Error::MissingEnergies(t))?;
            Ok(Complex64::from_polar(1.0, -e * t))
        })
    }

    fn coeffs_with(&self, phase: impl Fn(&Mode) -> Result<Complex64>) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_b];
        for m in &self.modes {
            let a = m.amplitude * phase(m)?;
            for (o, &c) in out.iter_mut().zip(&m.coeffs) {
                *o += a * c;
            }
        }
        Ok(out)
    }

    /// `Psi(t, x)`.
    pub fn wavefunction(&self, t: f64, x: f64) -> Result<Complex64> {
        let eval = Evaluator::new(self.harmonic_coeffs(t)?);
        Ok(eval.eval(x, &mut vec![0.0; self.n_b]))
    }

    /// `|Psi(t, x)|^2`.
    pub fn density(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.wavefunction(t, x)?.norm_sqr())
    }
}

/// Evaluates `sum_k c_k Psi_k(x)` for fixed coefficients.
struct Evaluator {
    coeffs: Vec<Complex64>,
}

impl Evaluator {
    fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    fn eval(&self, x: f64, scratch: &mut [f64]) -> Complex64 {
        hermite_functions_into(x, scratch);
        self.coeffs
            .iter()
            .zip(scratch.iter())
            .map(|(c, &p)| c * p)
            .sum()
    }
}

/// Lowest eigenpairs of the truncated Hamiltonian.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Coefficient vectors, largest-magnitude component positive.
    pub vectors: Vec<Vec<f64>>,
    /// `||H c - E c||` per pair.
    pub residuals: Vec<f64>,
    pub n_basis_used: usize,
}

impl EigenResult {
    /// Eigenstate `n` as a stationary [`WaveState`].
    pub fn state(&self, n: usize) -> Result<WaveState> {
        WaveState::from_eigen(self, &[(n, Complex64::new(1.0, 0.0))])
    }
}

pub fn solve_eigenstates(c: f64, k: f64, n_b: usize, count: usize) -> Result<EigenResult> {
    if count == 0 || count > n_b {
        return Err(invalid(
            "count",
            format!("need 1 <= count <= {n_b}, got {count}"),
        ));
    }
    let h = hamiltonian_matrix(c, k, n_b)?;
    let (values, vectors) = sorted_symmetric_eigen(h.clone())?;
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut result = EigenResult {
        energies: values[..count].to_vec(),
        vectors: Vec::with_capacity(count),
        residuals: Vec::with_capacity(count),
        n_basis_used: n_b,
    };
    for i in 0..count {
        let v = vectors.column(i);
        let residual = (&h * v - v * values[i]).norm();
        if residual > EIGEN_RESIDUAL_TOL * scale {
            return Err(Error::EigenSolve(n_b));
        }
        result.vectors.push(v.iter().copied().collect());
        result.residuals.push(residual);
    }
    Ok(result)
}

/// `||c(N_b + 2) - c(N_b)||` for the lowest `count` eigenvectors, the shorter
/// vector padded with zeros.
pub fn eigen_convergence(c: f64, k: f64, n_b: usize, count: usize) -> Result<Vec<f64>> {
    let small = solve_eigenstates(c, k, n_b, count)?;
    let large = solve_eigenstates(c, k, n_b + 2, count)?;
    Ok(small
        .vectors
        .iter()
        .zip(&large.vectors)
        .map(|(s, l)| {
            l.iter()
                .enumerate()
                .map(|(i, &x)| (x - s.get(i).copied().unwrap_or(0.0)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// `W_n(x, v) = (-1)^n / pi * L_n(2(x^2 + v^2)) * exp(-x^2 - v^2)`.
pub fn exact_wigner_eigenstate(n: usize, x: f64, v: f64) -> f64 {
    let r2 = x * x + v * v;
    let y = 2.0 * r2;
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next =
            ((2 * k + 1) as f64 - y) * cur / (k + 1) as f64 - k as f64 * prev / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * cur * (-r2).exp() / std::f64::consts::PI
}

/// Coefficient field `a_k(x_j) = Re{eps i^k / sqrt(2 pi) int Psi*(x + eps y/2) Psi(x - eps y/2) phi_k(y) dy}`.
pub fn initial_coefficients(
    state: &WaveState,
    spec: &BasisSpec,
    grid: &GridSpec,
) -> Result<CoefficientField> {
    if spec.family != BasisFamily::SymmetricHermite {
        return Err(Error::UnsupportedBasis);
    }
    let n = spec.n_basis;
    let n_b = state.n_basis();
    let eps = spec.epsilon;
    // Gaussian factors combine to exp(-x^2 - alpha y^2)
    let alpha = 0.5 + 0.25 * eps * eps;
    let sa = alpha.sqrt();
    let quad = gauss_hermite(2 * n_b + n + 8)?;
    let ys: Vec<f64> = quad.nodes.iter().map(|u| u / sa).collect();
    let mut phi = vec![0.0; ys.len() * n];
    for (row, &y) in phi.chunks_exact_mut(n).zip(&ys) {
        hermite_functions_into(y, row);
    }
    let eval = Evaluator::new(state.harmonic_coeffs(0.0)?);
    let pref = eps / (2.0 * std::f64::consts::PI).sqrt() / sa;
    let ik = |k: usize| match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };

    let rows: Vec<Result<Vec<f64>>> = (0..grid.nx)
        .into_par_iter()
        .map(|j| {
            let x = grid.point(j);
            let mut scratch = vec![0.0; n_b];
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for (i, &y) in ys.iter().enumerate() {
                let p = eval.eval(x + 0.5 * eps * y, &mut scratch).conj()
                    * eval.eval(x - 0.5 * eps * y, &mut scratch);
                // scaled weights carry exp(u^2); the integrand holds its own Gaussian
                let w = quad.scaled_weights[i] * p;
                for (a, &f) in acc.iter_mut().zip(&phi[i * n..(i + 1) * n]) {
                    *a += w * f;
                }
            }
            let mut out = Vec::with_capacity(n);
            for (k, a) in acc.into_iter().enumerate() {
                let z = ik(k) * a * pref;
                if z.im.abs() > INITIAL_IMAG_TOL {
                    return Err(Error::ImaginaryResidual {
                        residual: z.im.abs(),
                        tolerance: INITIAL_IMAG_TOL,
                    });
                }
                out.push(z.re);
            }
            Ok(out)
        })
        .collect();
    let mut data = Vec::with_capacity(n * grid.nx);
    for row in rows {
        data.extend(row?);
    }
    CoefficientField::from_data(n, *grid, data)
}

/// Gauss-Hermite order that resolves `exp(2 i v u / eps)` against the state.
fn transform_nodes(n_b: usize, v_max: f64, eps: f64) -> usize {
    let omega = 2.0 * v_max / eps;
    n_b + (0.5 * omega * omega).ceil() as usize + 24
}

/// `W(t, x, v) = 1/pi int Psi*(t, x + u) Psi(t, x - u) exp(2 i v u / eps) du`.
pub fn numerical_wigner_transform(
    state: &WaveState,
    t: f64,
    x: f64,
    v: f64,
    epsilon: f64,
) -> Result<f64> {
    Ok(numerical_wigner_row(state, t, x, &[v], epsilon)?[0])
}

/// Wigner function of `state` at one `x` and several `v`.
pub fn numerical_wigner_row(
    state: &WaveState,
    t: f64,
    x: f64,
    vs: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    let eval = Evaluator::new(state.harmonic_coeffs(t)?);
    let v_max = vs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let quad = gauss_hermite(transform_nodes(state.n_basis(), v_max, epsilon))?;
    let kernel = product_kernel(&eval, &quad.nodes, &quad.scaled_weights, x, state.n_basis());
    vs.iter()
        .map(|&v| transform_at(&kernel, &quad.nodes, v, epsilon))
        .collect()
}

/// Wigner function on the tensor grid `xs x vs`, row-major in `x`.
pub fn numerical_wigner_grid(
    state: &WaveState,
    t: f64,
    xs: &[f64],
    vs: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    let eval = Evaluator::new(state.harmonic_coeffs(t)?);
    let v_max = vs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let quad = gauss_hermite(transform_nodes(state.n_basis(), v_max, epsilon))?;
    let rows: Vec<Result<Vec<f64>>> = xs
        .par_iter()
        .map(|&x| {
            let kernel =
                product_kernel(&eval, &quad.nodes, &quad.scaled_weights, x, state.n_basis());
            vs.iter()
                .map(|&v| transform_at(&kernel, &quad.nodes, v, epsilon))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(xs.len() * vs.len());
    for row in rows {
        out.extend(row?);
    }
    Ok(out)
}

/// `sw_i Psi*(x + u_i) Psi(x - u_i)` at every node.
fn product_kernel(
    eval: &Evaluator,
    nodes: &[f64],
    sw: &[f64],
    x: f64,
    n_b: usize,
) -> Vec<Complex64> {
    let mut scratch = vec![0.0; n_b];
    nodes
        .iter()
        .zip(sw)
        .map(|(&u, &w)| w * eval.eval(x + u, &mut scratch).conj() * eval.eval(x - u, &mut scratch))
        .collect()
}

fn transform_at(kernel: &[Complex64], nodes: &[f64], v: f64, eps: f64) -> Result<f64> {
    let z: Complex64 = kernel
        .iter()
        .zip(nodes)
        .map(|(k, &u)| k * Complex64::from_polar(1.0, 2.0 * v * u / eps))
        .sum::<Complex64>()
        / std::f64::consts::PI;
    if z.im.abs() > TRANSFORM_IMAG_TOL {
        return Err(Error::ImaginaryResidual {
            residual: z.im.abs(),
            tolerance: TRANSFORM_IMAG_TOL,
        });
    }
    Ok(z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use std::f64::consts::{PI, TAU};

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn cat_state() -> WaveState {
        WaveState::harmonic(&[(0, ONE), (1, ONE)]).unwrap()
    }

    #[test]
    fn harmonic_functions_and_energies() {
        assert!((harmonic_eigenfunction(0, 0.0) - PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(harmonic_energy(3), 3.5);
        let q = gauss_hermite(30).unwrap();
        for n in 0..8 {
            let norm = q.integrate_bare(|x| harmonic_eigenfunction(n, x).powi(2));
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let h = hamiltonian_matrix(0.5, 0.0, 6).unwrap();
        assert_eq!(
            h,
            DMatrix::from_diagonal(&nalgebra::DVector::from_fn(6, |i, _| i as f64 + 0.5))
        );
        let x = position_matrix(4);
        assert!(((&x * &x)[(0, 0)] - 0.5).abs() < 1e-15);
        let h = hamiltonian_matrix(-0.4, 0.05, 20).unwrap();
        assert_eq!(max_abs(&(&h - h.transpose())), 0.0);
        // last diagonal entry uses the untruncated <n|x^4|n> = (6n^2 + 6n + 3)/4
        let n = 19.0;
        let expect = n + 0.5 + (-0.9) * (n + 0.5) + 0.05 * (6.0 * n * n + 6.0 * n + 3.0) / 4.0;
        assert!((h[(19, 19)] - expect).abs() < 1e-12);
        assert!(hamiltonian_matrix(0.5, 0.0, 1).is_err());
    }

    #[test]
    fn harmonic_eigenvectors_are_unit_vectors() {
        let r = solve_eigenstates(0.5, 0.0, 10, 4).unwrap();
        for (i, v) in r.vectors.iter().enumerate() {
            assert_eq!(r.energies[i], i as f64 + 0.5);
            for (j, &x) in v.iter().enumerate() {
                assert_eq!(x, if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(eigen_convergence(0.5, 0.0, 10, 2)
            .unwrap()
            .iter()
            .all(|&d| d == 0.0));
        assert!(solve_eigenstates(0.5, 0.0, 4, 5).is_err());
    }

    #[test]
    fn double_well_energies() {
        let r = solve_eigenstates(-0.4, 0.05, 86, 2).unwrap();
        assert!((r.energies[0] + 0.310).abs() < 1e-3, "{}", r.energies[0]);
        assert!((r.energies[1] + 0.173).abs() < 1e-3, "{}", r.energies[1]);
        assert!(r.residuals.iter().all(|&x| x <= 1e-10));
    }

    #[test]
    fn ground_energy_decreases_with_basis_size() {
        for &(c, k) in &[(0.5, 0.5), (-0.4, 0.05), (0.5, 0.001)] {
            let mut last = f64::INFINITY;
            for n_b in (4..60).step_by(2) {
                let e = solve_eigenstates(c, k, n_b, 1).unwrap().energies[0];
                assert!(e <= last + 1e-12, "c={c} k={k} n_b={n_b}");
                last = e;
            }
        }
    }

    #[test]
    fn weak_quartic_ground_state_converges_fast() {
        let d = eigen_convergence(0.5, 0.001, 20, 2).unwrap();
        assert!(d[0] < 1e-14, "{d:?}");
        assert!(d[1] > d[0]);
    }

    #[test]
    fn state_normalization() {
        let s = WaveState::harmonic(&[(0, ONE), (1, ONE)]).unwrap();
        let c = s.harmonic_coeffs(0.0).unwrap();
        let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((c[0].re - 0.5f64.sqrt()).abs() < 1e-15);
        let r = solve_eigenstates(-0.4, 0.05, 40, 2).unwrap();
        let s = WaveState::from_eigen(&r, &[(0, ONE), (1, Complex64::new(0.0, 2.0))]).unwrap();
        let norm: f64 = s
            .harmonic_coeffs(3.0)
            .unwrap()
            .iter()
            .map(|z| z.norm_sqr())
            .sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let fixed = WaveState::from_coefficients(&[ONE, ONE]).unwrap();
        assert!(matches!(
            fixed.harmonic_coeffs(1.0),
            Err(Error::MissingEnergies(_))
        ));
        assert!(WaveState::harmonic(&[(0, Complex64::new(0.0, 0.0))]).is_err());
    }

    #[test]
    fn laguerre_closed_form() {
        assert!((exact_wigner_eigenstate(0, 0.0, 0.0) - 1.0 / PI).abs() < 1e-16);
        assert!((exact_wigner_eigenstate(1, 0.0, 0.0) + 1.0 / PI).abs() < 1e-16);
        let q = gauss_hermite(20).unwrap();
        for n in 0..=5 {
            let mut total = 0.0;
            for (&x, &wx) in q.nodes.iter().zip(&q.scaled_weights) {
                for (&v, &wv) in q.nodes.iter().zip(&q.scaled_weights) {
                    total += wx * wv * exact_wigner_eigenstate(n, x, v);
                }
            }
            assert!((total - 1.0).abs() < 1e-10, "n={n} total={total}");
        }
    }

    #[test]
    fn transform_matches_laguerre_for_eigenstates() {
        for n in 0..5 {
            let s = WaveState::harmonic(&[(n, ONE)]).unwrap();
            for &(x, v) in &[
                (0.0, 0.0),
                (0.7, -1.2),
                (-2.0, 3.0),
                (1.5, 4.9),
                (3.3, -5.0),
            ] {
                for t in [0.0, 1.7] {
                    let w = numerical_wigner_transform(&s, t, x, v, 1.0).unwrap();
                    assert!(
                        (w - exact_wigner_eigenstate(n, x, v)).abs() < 1e-10,
                        "n={n} x={x} v={v}"
                    );
                }
            }
        }
    }

    #[test]
    fn superposition_returns_after_one_period() {
        let s = cat_state();
        for &(x, v) in &[(0.3, 0.2), (-1.0, 1.5), (2.0, -0.5)] {
            let w0 = numerical_wigner_transform(&s, 0.0, x, v, 1.0).unwrap();
            let w1 = numerical_wigner_transform(&s, TAU, x, v, 1.0).unwrap();
            let wh = numerical_wigner_transform(&s, PI, x, v, 1.0).unwrap();
            assert!((w0 - w1).abs() < 1e-10);
            // half a period mirrors x and v
            let wm = numerical_wigner_transform(&s, 0.0, -x, -v, 1.0).unwrap();
            assert!((wh - wm).abs() < 1e-10);
        }
    }

    #[test]
    fn transform_marginal_is_density() {
        let r = solve_eigenstates(-0.4, 0.05, 40, 2).unwrap();
        let s = WaveState::from_eigen(&r, &[(0, ONE), (1, ONE)]).unwrap();
        let dv = 0.05;
        let vs: Vec<f64> = (0..=320).map(|i| -8.0 + i as f64 * dv).collect();
        for &x in &[-2.0, -0.5, 0.0, 1.1, 2.7] {
            let row = numerical_wigner_row(&s, 4.0, x, &vs, 1.0).unwrap();
            let marginal: f64 = row.iter().sum::<f64>() * dv;
            assert!(
                (marginal - s.density(4.0, x).unwrap()).abs() < 1e-8,
                "x={x}"
            );
        }
    }

    #[test]
    fn grid_transform_agrees_with_pointwise() {
        let s = cat_state();
        let xs = [-1.0, 0.5];
        let vs = [-2.0, 0.0, 1.0];
        let g = numerical_wigner_grid(&s, 0.4, &xs, &vs, 1.0).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                let p = numerical_wigner_transform(&s, 0.4, x, v, 1.0).unwrap();
                assert!((g[i * 3 + j] - p).abs() < 1e-12);
            }
        }
    }

    fn reconstruct_at(field: &CoefficientField, j: usize, v: f64) -> f64 {
        let phis = crate::basis::hermite_functions(field.n_basis(), v);
        field.point(j).iter().zip(&phis).map(|(a, p)| a * p).sum()
    }

    #[test]
    fn ground_state_coefficients() {
        let grid = GridSpec::with_spacing(-3.0, 3.0, 0.25).unwrap();
        let spec = BasisSpec::hermite(32).unwrap();
        let s = WaveState::harmonic(&[(0, ONE)]).unwrap();
        let f = initial_coefficients(&s, &spec, &grid).unwrap();
        for j in 0..grid.nx {
            for k in (1..32).step_by(2) {
                assert!(f.get(k, j).abs() < 1e-15);
            }
            let x = grid.point(j);
            for &v in &[-3.0, -1.0, 0.0, 0.4, 2.5] {
                let w = reconstruct_at(&f, j, v);
                assert!((w - (-x * x - v * v).exp() / PI).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sixteen_term_ground_state_is_truncation_limited() {
        // best 16-term approximation of exp(-v^2) misses by 1.13665e-5 / pi at most
        let grid = GridSpec::new(-0.5, 0.5, 4).unwrap();
        let spec = BasisSpec::hermite(16).unwrap();
        let s = WaveState::harmonic(&[(0, ONE)]).unwrap();
        let f = initial_coefficients(&s, &spec, &grid).unwrap();
        let j = 2;
        assert_eq!(grid.point(j), 0.0);
        let worst = (0..=600)
            .map(|i| {
                let v = -3.0 + i as f64 * 0.01;
                (reconstruct_at(&f, j, v) - (-v * v).exp() / PI).abs()
            })
            .fold(0.0f64, f64::max);
        assert!(
            (worst - 1.136650988775345e-05).abs() < 1e-3 * 1.136650988775345e-05,
            "{worst}"
        );
    }

    #[test]
    fn eigenstate_coefficients_match_laguerre() {
        let grid = GridSpec::with_spacing(-3.0, 3.0, 0.5).unwrap();
        let spec = BasisSpec::hermite(48).unwrap();
        for n in 0..=3 {
            let s = WaveState::harmonic(&[(n, ONE)]).unwrap();
            let f = initial_coefficients(&s, &spec, &grid).unwrap();
            for j in 0..grid.nx {
                let x = grid.point(j);
                for &v in &[-2.0, -0.3, 0.0, 1.1] {
                    let w = reconstruct_at(&f, j, v);
                    assert!((w - exact_wigner_eigenstate(n, x, v)).abs() < 1e-8, "n={n}");
                }
            }
        }
    }

    #[test]
    fn superposition_coefficients_match_transform() {
        let grid = GridSpec::with_spacing(-3.0, 3.0, 0.5).unwrap();
        let spec = BasisSpec::hermite(48).unwrap();
        let s = cat_state();
        let f = initial_coefficients(&s, &spec, &grid).unwrap();
        for j in 0..grid.nx {
            let x = grid.point(j);
            for &v in &[-2.5, -0.3, 0.0, 1.1, 2.0] {
                let w = reconstruct_at(&f, j, v);
                let e = numerical_wigner_transform(&s, 0.0, x, v, 1.0).unwrap();
                assert!((w - e).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn asymmetric_basis_rejected() {
        let grid = GridSpec::new(-1.0, 1.0, 8).unwrap();
        let spec = BasisSpec::new(BasisFamily::AsymmetricHermite, 4, 1.0, 1.0).unwrap();
        assert!(matches!(
            initial_coefficients(&cat_state(), &spec, &grid),
            Err(Error::UnsupportedBasis)
        ));
    }
}
