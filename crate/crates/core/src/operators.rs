//! Matrices of the reaction-advection system in the Hermite basis.
//!
//! The coefficient vector `a(x)` of `W(x, v) = sum_k a_k(x) phi_k(v)` obeys
//! `d_t a + A d_x a + M_V(x) a = 0`, where `A` is the (symmetric) matrix of
//! multiplication by `v` and `M_V` the (skew-symmetric) matrix of the
//! pseudo-differential operator. Forcing steps apply orthogonal Cayley
//! rotations built from `M_V`; streaming diagonalizes `A`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{
    gauss_hermite, hermite_functions_into, jacobi_eigenvalues, jacobi_matrix, BasisFamily,
    BasisSpec,
};
use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{self, fix_sign, skew_defect, spectral_norm};
use crate::potential::PolynomialPotential;

const SKEW_TOL: f64 = 1e-12;

/// `A`, with `A = T diag(D) T^T`.
#[derive(Debug, Clone)]
pub struct AdvectionOperator {
    pub a_matrix: DMatrix<f64>,
    /// Orthogonal; column `i` is the eigenvector for `eigvals[i]`.
    pub eigvecs: DMatrix<f64>,
    /// Ascending; these are the Gauss-Hermite nodes of order `N`.
    pub eigvals: Vec<f64>,
}

impl AdvectionOperator {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n_basis", "must be at least 1"));
        }
        let a_matrix = advection_matrix(n);
        let eigvals = jacobi_eigenvalues(n)?;
        // refine the eigenvalues to the exact Hermite roots
        let quad = gauss_hermite(n)?;
        let eigvals: Vec<f64> = if quad.nodes.len() == eigvals.len() {
            quad.nodes
        } else {
            eigvals
        };
        // Eigenvector of the Jacobi matrix at a root l is (phi_0(l), ..., phi_{n-1}(l)).
        let mut eigvecs = DMatrix::zeros(n, n);
        let mut phis = vec![0.0; n];
        for (i, &l) in eigvals.iter().enumerate() {
            hermite_functions_into(l, &mut phis);
            let mut col = DVector::from_column_slice(&phis);
            col.normalize_mut();
            fix_sign(&mut col);
            eigvecs.set_column(i, &col);
        }
        Ok(Self {
            a_matrix,
            eigvecs,
            eigvals,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.eigvals.len()
    }

    pub fn max_speed(&self) -> f64 {
        self.eigvals.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

/// `A[k][l] = int phi_k v phi_l dv`: zero diagonal, `A[k][k+1] = sqrt((k+1)/2)`.
pub fn advection_matrix(n: usize) -> DMatrix<f64> {
    jacobi_matrix(n)
}

/// `i^p` for even `p`, i.e. `(-1)^(p/2)`.
fn i_power_even(p: i64) -> f64 {
    debug_assert!(p % 2 == 0);
    if (p / 2).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `(M_n)_{k,l} = i^{k-l-1} int eta^{2n+1}/(2n+1)! phi_k(eta) phi_l(eta) d eta`,
/// by Gauss-Hermite quadrature with `N + n + 1` nodes (exact).
pub fn moment_matrix(order: usize, n_basis: usize) -> Result<DMatrix<f64>> {
    let power = 2 * order + 1;
    let quad = gauss_hermite(n_basis + order + 1)?;
    let fact: f64 = (1..=power).map(|f| f as f64).product();
    let mut m = DMatrix::zeros(n_basis, n_basis);
    let mut phis = vec![0.0; n_basis];
    for (&eta, &w) in quad.nodes.iter().zip(&quad.scaled_weights) {
        hermite_functions_into(eta, &mut phis);
        let s = w * eta.powi(power as i32) / fact;
        for l in 0..n_basis {
            for k in 0..n_basis {
                let d = k as i64 - l as i64;
                if d.rem_euclid(2) == 1 && d.unsigned_abs() as usize <= power {
                    m[(k, l)] += s * phis[k] * phis[l];
                }
            }
        }
    }
    for l in 0..n_basis {
        for k in 0..n_basis {
            let d = k as i64 - l as i64;
            m[(k, l)] *= if d.rem_euclid(2) == 1 {
                i_power_even(d - 1)
            } else {
                0.0
            };
        }
    }
    // exact skew-symmetry
    let skew = (&m - m.transpose()) * 0.5;
    Ok(skew)
}

/// Caches the moment matrices needed to assemble `M_V(x)` for one potential.
#[derive(Debug, Clone)]
pub struct PseudoDiffAssembler {
    spec: BasisSpec,
    /// `(scale_n, M_n, d^{2n+1} V)` for every odd derivative that is nonzero.
    terms: Vec<(f64, DMatrix<f64>, PolynomialPotential)>,
}

impl PseudoDiffAssembler {
    pub fn new(spec: &BasisSpec, potential: &PolynomialPotential) -> Result<Self> {
        if spec.family != BasisFamily::SymmetricHermite {
            return Err(Error::UnsupportedBasis);
        }
        let mut terms = Vec::new();
        let degree = potential.degree().unwrap_or(0);
        let mut order = 0;
        while 2 * order + 1 <= degree {
            let deriv = potential.derivative(2 * order + 1);
            if !deriv.is_zero() {
                let scale = spec.b_strength * (0.5 * spec.epsilon).powi(2 * order as i32);
                terms.push((scale, moment_matrix(order, spec.n_basis)?, deriv));
            }
            order += 1;
        }
        Ok(Self { spec: *spec, terms })
    }

    /// `M_V(x) = B sum_n (eps/2)^{2n} M_n V^{(2n+1)}(x)`.
    pub fn at(&self, x: f64) -> DMatrix<f64> {
        let n = self.spec.n_basis;
        let mut m = DMatrix::zeros(n, n);
        for (scale, mn, deriv) in &self.terms {
            let c = scale * deriv.eval(x);
            if c != 0.0 {
                m += mn * c;
            }
        }
        m
    }
}

/// Skew-symmetric matrix of the pseudo-differential operator at `x`.
pub fn pseudo_diff_matrix(
    spec: &BasisSpec,
    potential: &PolynomialPotential,
    x: f64,
) -> Result<DMatrix<f64>> {
    Ok(PseudoDiffAssembler::new(spec, potential)?.at(x))
}

fn check_skew(m: &DMatrix<f64>) -> Result<()> {
    let defect = skew_defect(m);
    if defect > SKEW_TOL * linalg::max_abs(m).max(1.0) {
        return Err(Error::NotSkewSymmetric(defect));
    }
    Ok(())
}

/// `R = (I + dt/2 M)^{-1} (I - dt/2 M)`; orthogonal for skew-symmetric `M`.
pub fn cayley_rotation(m: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    check_skew(m)?;
    let n = m.nrows();
    let half = m * (0.5 * dt);
    let eye = DMatrix::<f64>::identity(n, n);
    let lhs = &eye + &half;
    let rhs = &eye - &half;
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("I + dt/2 M is singular".into()))
}

/// How the forcing exponential `exp(-dt M_V)` is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingMethod {
    Cayley,
    Euler,
    Rk4,
    /// Matrix exponential through an eigendecomposition.
    Exact,
}

impl ForcingMethod {
    pub fn name(self) -> &'static str {
        match self {
            ForcingMethod::Cayley => "cayley",
            ForcingMethod::Euler => "euler",
            ForcingMethod::Rk4 => "rk4",
            ForcingMethod::Exact => "exact",
        }
    }

    pub fn is_unitary(self) -> bool {
        matches!(self, ForcingMethod::Cayley | ForcingMethod::Exact)
    }
}

impl std::str::FromStr for ForcingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cayley" => Ok(Self::Cayley),
            "euler" => Ok(Self::Euler),
            "rk4" => Ok(Self::Rk4),
            "exact" => Ok(Self::Exact),
            other => Err(invalid(
                "method",
                format!("unknown forcing method `{other}`"),
            )),
        }
    }
}

/// One-step forcing propagator approximating `exp(-dt M)`.
pub fn forcing_propagator(
    method: ForcingMethod,
    m: &DMatrix<f64>,
    dt: f64,
) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    match method {
        ForcingMethod::Cayley => cayley_rotation(m, dt),
        ForcingMethod::Euler => Ok(&eye - m * dt),
        ForcingMethod::Rk4 => {
            let step = m * (-dt);
            let mut term = eye.clone();
            let mut sum = eye;
            for j in 1..=4 {
                term = &term * &step / j as f64;
                sum += &term;
            }
            Ok(sum)
        }
        ForcingMethod::Exact => {
            check_skew(m)?;
            linalg::skew_exponential(m, -dt)
        }
    }
}

/// Spectral norm of the one-step forcing propagator.
pub fn amplification_factor(method: ForcingMethod, m: &DMatrix<f64>, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    Ok(spectral_norm(&forcing_propagator(method, m, dt)?))
}

/// Forcing matrix of the harmonic potential in the asymmetric Hermite basis:
/// `M_V = -x L` with `L[k+1][k] = sqrt(2(k+1))`.
pub fn asymmetric_forcing_matrix(n: usize, x: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j + 1 {
            -x * (2.0 * i as f64).sqrt()
        } else {
            0.0
        }
    })
}

/// `exp(-M_V dt)` for the asymmetric basis; `M_V` is nilpotent so the series
/// ends after `n` terms.
pub fn asymmetric_propagator(n: usize, x: f64, dt: f64) -> DMatrix<f64> {
    let step = asymmetric_forcing_matrix(n, x) * (-dt);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for j in 1..n {
        term = &term * &step / j as f64;
        sum += &term;
    }
    sum
}

/// Per-grid-point forcing matrices and their precomputed propagators.
#[derive(Debug, Clone)]
pub struct ForcingOperator {
    pub method: ForcingMethod,
    pub dt: f64,
    pub m_matrices: Vec<DMatrix<f64>>,
    /// Full-step propagators `R(x_j)` for `dt`.
    pub rotations: Vec<DMatrix<f64>>,
    /// Half-step propagators for `dt / 2`.
    pub half_rotations: Vec<DMatrix<f64>>,
}

impl ForcingOperator {
    /// Non-unitary methods (Euler, RK4) are refused unless `allow_unsafe`.
    pub fn build(
        spec: &BasisSpec,
        potential: &PolynomialPotential,
        grid: &GridSpec,
        dt: f64,
        method: ForcingMethod,
        allow_unsafe: bool,
    ) -> Result<Self> {
        if !method.is_unitary() && !allow_unsafe {
            return Err(Error::UnsafeForcing(method.name()));
        }
        if !(dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        let assembler = PseudoDiffAssembler::new(spec, potential)?;
        let m_matrices: Vec<DMatrix<f64>> =
            grid.points().into_iter().map(|x| assembler.at(x)).collect();
        let rotations = m_matrices
            .iter()
            .map(|m| forcing_propagator(method, m, dt))
            .collect::<Result<Vec<_>>>()?;
        let half_rotations = m_matrices
            .iter()
            .map(|m| forcing_propagator(method, m, 0.5 * dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            method,
            dt,
            m_matrices,
            rotations,
            half_rotations,
        })
    }

    pub fn nx(&self) -> usize {
        self.m_matrices.len()
    }
}

/// Everything the time stepper needs for one (basis, potential, grid, dt).
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub spec: BasisSpec,
    pub grid: GridSpec,
    pub advection: AdvectionOperator,
    pub forcing: ForcingOperator,
    /// `int phi_k dv`.
    pub basis_integrals: Vec<f64>,
    /// `int v phi_k dv` and `int v^2 phi_k dv`.
    pub velocity_moments: [Vec<f64>; 2],
    /// Propagators conjugated into characteristic variables, `T^T R T`.
    pub(crate) char_full: Vec<DMatrix<f64>>,
    pub(crate) char_half: Vec<DMatrix<f64>>,
    /// `T^T R_half R_half T`: two consecutive half kicks.
    pub(crate) char_double_half: Vec<DMatrix<f64>>,
}

impl OperatorSet {
    pub fn new(
        spec: &BasisSpec,
        potential: &PolynomialPotential,
        grid: &GridSpec,
        dt: f64,
        method: ForcingMethod,
        allow_unsafe: bool,
    ) -> Result<Self> {
        let advection = AdvectionOperator::new(spec.n_basis)?;
        let forcing = ForcingOperator::build(spec, potential, grid, dt, method, allow_unsafe)?;
        let t = &advection.eigvecs;
        let tt = t.transpose();
        let conj = |r: &DMatrix<f64>| &tt * r * t;
        let char_full = forcing.rotations.iter().map(conj).collect();
        let char_half: Vec<DMatrix<f64>> = forcing.half_rotations.iter().map(conj).collect();
        let char_double_half = char_half.iter().map(|r| r * r).collect();
        Ok(Self {
            spec: *spec,
            grid: *grid,
            basis_integrals: crate::basis::basis_integrals(spec)?,
            velocity_moments: [
                crate::basis::velocity_moments(spec.n_basis, 1)?,
                crate::basis::velocity_moments(spec.n_basis, 2)?,
            ],
            advection,
            forcing,
            char_full,
            char_half,
            char_double_half,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.spec.n_basis
    }
}
