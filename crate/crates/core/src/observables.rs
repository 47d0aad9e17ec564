//! Phase-space diagnostics computed from the coefficient field.

use rayon::prelude::*;

use crate::basis::hermite_functions_into;
use crate::dynamics::CoefficientField;
use crate::error::{invalid, Error, Result};
use crate::operators::OperatorSet;

const DEGENERATE_VARIANCE: f64 = 1e-14;

/// `W(x_i, v_j)` on a tensor grid, stored row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerSnapshot {
    pub time: f64,
    pub x_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    pub w: Vec<f64>,
}

impl WignerSnapshot {
    pub fn new(time: f64, x_grid: Vec<f64>, v_grid: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        for (name, g) in [("x_grid", &x_grid), ("v_grid", &v_grid)] {
            if g.is_empty() || g.windows(2).any(|p| !(p[1] > p[0])) {
                return Err(invalid(
                    name,
                    "grid must be non-empty and strictly increasing",
                ));
            }
        }
        if w.len() != x_grid.len() * v_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: x_grid.len() * v_grid.len(),
                actual: w.len(),
            });
        }
        Ok(Self {
            time,
            x_grid,
            v_grid,
            w,
        })
    }

    /// Samples `f(x, v)` on the grids of `self`.
    pub fn sample_like(&self, time: f64, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let nv = self.v_grid.len();
        let mut w = vec![0.0; self.w.len()];
        w.par_chunks_mut(nv)
            .zip(self.x_grid.par_iter())
            .for_each(|(row, &x)| {
                for (o, &v) in row.iter_mut().zip(&self.v_grid) {
                    *o = f(x, v);
                }
            });
        Self {
            time,
            x_grid: self.x_grid.clone(),
            v_grid: self.v_grid.clone(),
            w,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.v_grid.len() + j]
    }

    /// `self - other` on a shared grid.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            w: self.w.iter().zip(&other.w).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.w.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.x_grid != other.x_grid || self.v_grid != other.v_grid {
            return Err(Error::GridMismatch(
                "snapshots are sampled on different grids".into(),
            ));
        }
        Ok(())
    }
}

/// `W(x_i, v) = sum_k a_k(x_i) phi_k(v)` at every grid point and every `v`.
pub fn reconstruct(field: &CoefficientField, v_grid: &[f64], time: f64) -> Result<WignerSnapshot> {
    let n = field.n_basis();
    let mut phi = vec![0.0; v_grid.len() * n];
    for (row, &v) in phi.chunks_exact_mut(n).zip(v_grid) {
        hermite_functions_into(v, row);
    }
    let nv = v_grid.len();
    let mut w = vec![0.0; field.grid().nx * nv];
    w.par_chunks_mut(nv.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let a = field.point(i);
            for (o, p) in row.iter_mut().zip(phi.chunks_exact(n)) {
                *o = a.iter().zip(p).map(|(x, y)| x * y).sum();
            }
        });
    WignerSnapshot::new(time, field.grid().points(), v_grid.to_vec(), w)
}

/// `rho(x_j) = sum_k a_k(x_j) w_k` with `w_k = int phi_k dv`.
pub fn density(field: &CoefficientField, basis_integrals: &[f64]) -> Result<Vec<f64>> {
    contract(field, basis_integrals)
}

/// `sum_j rho(x_j) dx`.
pub fn mass(field: &CoefficientField, basis_integrals: &[f64]) -> Result<f64> {
    Ok(density(field, basis_integrals)?.iter().sum::<f64>() * field.grid().dx())
}

fn contract(field: &CoefficientField, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != field.n_basis() {
        return Err(Error::DimensionMismatch {
            expected: field.n_basis(),
            actual: weights.len(),
        });
    }
    Ok((0..field.grid().nx)
        .map(|j| field.point(j).iter().zip(weights).map(|(a, w)| a * w).sum())
        .collect())
}

/// `sqrt(1/(Nx Nv) sum |W - W_exact|^2)`.
pub fn error_metric(w: &WignerSnapshot, w_exact: &WignerSnapshot) -> Result<f64> {
    w.check_same_grid(w_exact)?;
    let sum: f64 =
        w.w.iter()
            .zip(&w_exact.w)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
    Ok((sum / w.w.len() as f64).sqrt())
}

/// [`error_metric`] against an evaluator sampled on the grids of `w`.
pub fn error_metric_with(
    w: &WignerSnapshot,
    exact: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<f64> {
    error_metric(w, &w.sample_like(w.time, exact))
}

/// First and second phase-space moments, normalized by the mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub time: f64,
    pub mass: f64,
    pub mean_x: f64,
    pub mean_v: f64,
    pub var_x: f64,
    pub var_v: f64,
    pub cov_xv: f64,
    /// `sqrt(var_x var_v)`.
    pub uncertainty: f64,
    /// `cov_xv / (dx dv)`, 0 when a variance vanishes.
    pub normalized_cov: f64,
    /// A variance was below the degeneracy threshold.
    pub degenerate: bool,
}

impl MomentReport {
    pub fn delta_x(&self) -> f64 {
        self.var_x.max(0.0).sqrt()
    }

    pub fn delta_v(&self) -> f64 {
        self.var_v.max(0.0).sqrt()
    }
}

pub fn moments(field: &CoefficientField, ops: &OperatorSet, time: f64) -> Result<MomentReport> {
    let dx = field.grid().dx();
    let rho = density(field, &ops.basis_integrals)?;
    let j1 = contract(field, &ops.velocity_moments[0])?;
    let j2 = contract(field, &ops.velocity_moments[1])?;
    let xs = field.grid().points();
    let (mut m, mut sx, mut sxx, mut sv, mut svv, mut sxv) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..xs.len() {
        let x = xs[j];
        m += rho[j];
        sx += x * rho[j];
        sxx += x * x * rho[j];
        sv += j1[j];
        svv += j2[j];
        sxv += x * j1[j];
    }
    let mass = m * dx;
    if !(mass.abs() > f64::MIN_POSITIVE) {
        return Err(invalid("field", "mass vanishes; moments are undefined"));
    }
    let norm = dx / mass;
    let mean_x = sx * norm;
    let mean_v = sv * norm;
    let var_x = sxx * norm - mean_x * mean_x;
    let var_v = svv * norm - mean_v * mean_v;
    let cov_xv = sxv * norm - mean_x * mean_v;
    let uncertainty = (var_x.max(0.0) * var_v.max(0.0)).sqrt();
    let degenerate = var_x < DEGENERATE_VARIANCE || var_v < DEGENERATE_VARIANCE;
    Ok(MomentReport {
        time,
        mass,
        mean_x,
        mean_v,
        var_x,
        var_v,
        cov_xv,
        uncertainty,
        normalized_cov: if degenerate {
            0.0
        } else {
            cov_xv / uncertainty
        },
        degenerate,
    })
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fit_slope(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len().min(err.len()) as f64;
    let xs: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|x| x.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Interior local maxima of a uniformly sampled series, refined by a parabola
/// through each peak and its neighbours. Returns `(t, y)` pairs.
pub fn local_maxima(ts: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    let mut peaks = Vec::new();
    for i in 1..ys.len().saturating_sub(1) {
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        if b > a && b >= c {
            let denom = a - 2.0 * b + c;
            let shift = if denom < 0.0 {
                0.5 * (a - c) / denom
            } else {
                0.0
            };
            let h = ts[i + 1] - ts[i];
            peaks.push((ts[i] + shift * h, b - 0.25 * (a - c) * shift));
        }
    }
    peaks
}
