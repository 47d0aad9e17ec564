//! Split-step time evolution of the coefficient field.
//!
//! Streaming runs on characteristic variables `b = T^T a`, where every
//! component is a scalar advection with speed `D[i]`. Forcing applies the
//! precomputed per-point propagators. Strang steps are half-kick, stream,
//! half-kick; consecutive half kicks between observations are fused into one
//! precomputed product, which leaves the composition unchanged.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
pub use crate::grid::GridSpec;
use crate::linalg::mat_vec_into;
use crate::operators::{ForcingOperator, OperatorSet};

const CFL_SLACK: f64 = 1e-12;

/// `a_k(x_j)` for `k < N`, `j < nx`, stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    n_basis: usize,
    grid: GridSpec,
    data: Vec<f64>,
}

impl CoefficientField {
    pub fn zeros(n_basis: usize, grid: GridSpec) -> Self {
        Self {
            n_basis,
            grid,
            data: vec![0.0; n_basis * grid.nx],
        }
    }

    /// `data[j * n_basis + k] = a_k(x_j)`; rejects non-finite entries.
    pub fn from_data(n_basis: usize, grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_basis * grid.nx {
            return Err(Error::DimensionMismatch {
                expected: n_basis * grid.nx,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(invalid("data", "coefficient field contains NaN or Inf"));
        }
        Ok(Self {
            n_basis,
            grid,
            data,
        })
    }

    /// Builds `a_k(x_j) = f(k, j)`.
    pub fn from_fn(
        n_basis: usize,
        grid: GridSpec,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n_basis * grid.nx);
        for j in 0..grid.nx {
            for k in 0..n_basis {
                data.push(f(k, j));
            }
        }
        Self::from_data(n_basis, grid, data)
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[j * self.n_basis + k]
    }

    pub fn set(&mut self, k: usize, j: usize, value: f64) {
        self.data[j * self.n_basis + k] = value;
    }

    /// Coefficient vector at grid point `j`.
    pub fn point(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_basis..(j + 1) * self.n_basis]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `sqrt(sum_j sum_k a_k(x_j)^2 dx)`.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|x| x * x).sum::<f64>() * self.grid.dx()).sqrt()
    }

    /// `sum_k a_k(x_j)^2` per grid point.
    pub fn point_norms_sq(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.n_basis)
            .map(|p| p.iter().map(|x| x * x).sum())
            .collect()
    }

    /// `sum_j a_k(x_j)` per component.
    pub fn component_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_basis];
        for p in self.data.chunks_exact(self.n_basis) {
            for (s, x) in sums.iter_mut().zip(p) {
                *s += x;
            }
        }
        sums
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n_basis != other.n_basis {
            return Err(Error::DimensionMismatch {
                expected: self.n_basis,
                actual: other.n_basis,
            });
        }
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Applies `m_j` to the coefficient vector of every point `j`.
    pub(crate) fn apply_per_point(&mut self, matrices: &[DMatrix<f64>]) {
        let n = self.n_basis;
        self.data
            .par_chunks_mut(n)
            .zip(matrices.par_iter())
            .for_each_init(
                || vec![0.0; n],
                |scratch, (p, m)| {
                    mat_vec_into(m, p, scratch);
                    p.copy_from_slice(scratch);
                },
            );
    }

    /// Applies one matrix at every point.
    fn apply_uniform(&mut self, m: &DMatrix<f64>) {
        let n = self.n_basis;
        self.data.par_chunks_mut(n).for_each_init(
            || vec![0.0; n],
            |scratch, p| {
                mat_vec_into(m, p, scratch);
                p.copy_from_slice(scratch);
            },
        );
    }
}

/// Characteristic variables `b(x_j) = T^T a(x_j)`.
pub fn to_characteristic(field: &CoefficientField, t: &DMatrix<f64>) -> Result<CoefficientField> {
    check_square(t, field.n_basis)?;
    let mut out = field.clone();
    out.apply_uniform(&t.transpose());
    Ok(out)
}

/// Physical variables `a(x_j) = T b(x_j)`.
pub fn from_characteristic(field: &CoefficientField, t: &DMatrix<f64>) -> Result<CoefficientField> {
    check_square(t, field.n_basis)?;
    let mut out = field.clone();
    out.apply_uniform(t);
    Ok(out)
}

fn check_square(t: &DMatrix<f64>, n: usize) -> Result<()> {
    if t.nrows() != n || t.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: t.nrows().max(t.ncols()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Upwind,
    LaxWendroff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    /// `[force(dt); stream(dt)]` per step.
    FirstOrder,
    /// `[force(dt/2); stream(dt); force(dt/2)]` per step.
    Strang,
}

/// Time step, discretization choices and the resulting Courant number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub scheme: Scheme,
    pub splitting: Splitting,
    /// `max |lambda| dt / dx`.
    pub courant: f64,
}

impl StepPlan {
    /// Rejects plans with a Courant number above one.
    pub fn new(
        dt: f64,
        scheme: Scheme,
        splitting: Splitting,
        max_speed: f64,
        dx: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let courant = max_speed * dt / dx;
        if courant > 1.0 + CFL_SLACK {
            return Err(Error::CflViolation { courant });
        }
        Ok(Self {
            dt,
            scheme,
            splitting,
            courant,
        })
    }

    /// Largest step with Courant number at most `target` that divides
    /// `t_end` into an even number of steps.
    pub fn for_duration(
        t_end: f64,
        target_courant: f64,
        scheme: Scheme,
        splitting: Splitting,
        max_speed: f64,
        dx: f64,
    ) -> Result<Self> {
        if !(target_courant > 0.0 && target_courant <= 1.0) {
            return Err(invalid(
                "courant",
                format!("target must lie in (0, 1], got {target_courant}"),
            ));
        }
        if !(t_end > 0.0) {
            return Err(invalid("t_end", "must be positive to derive a step"));
        }
        let dt_max = target_courant * dx / max_speed.max(f64::MIN_POSITIVE);
        let mut steps = (t_end / dt_max).ceil().max(1.0) as usize;
        steps += steps % 2;
        Self::new(t_end / steps as f64, scheme, splitting, max_speed, dx)
    }

    /// Number of steps to reach `t_end`; `t_end` must be a multiple of `dt`.
    pub fn steps_for(&self, t_end: f64) -> Result<usize> {
        if t_end < 0.0 {
            return Err(invalid("t_end", "must be non-negative"));
        }
        let steps = (t_end / self.dt).round();
        if (steps * self.dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
            return Err(invalid(
                "t_end",
                format!("{t_end} is not a whole number of steps of dt = {}", self.dt),
            ));
        }
        Ok(steps as usize)
    }
}

/// Three-point stencil weights `(left, centre, right)` for one characteristic speed.
fn stencil(nu: f64, scheme: Scheme) -> (f64, f64, f64) {
    match scheme {
        Scheme::LaxWendroff => {
            let nu2 = nu * nu;
            (0.5 * (nu + nu2), 1.0 - nu2, 0.5 * (nu2 - nu))
        }
        Scheme::Upwind if nu >= 0.0 => (nu, 1.0 - nu, 0.0),
        Scheme::Upwind => (0.0, 1.0 + nu, -nu),
    }
}

/// Precomputed stencil for all components.
#[derive(Debug, Clone)]
struct Streamer {
    left: Vec<f64>,
    centre: Vec<f64>,
    right: Vec<f64>,
    scratch: Vec<f64>,
}

impl Streamer {
    fn new(eigvals: &[f64], plan: &StepPlan, dx: f64, len: usize) -> Self {
        let (mut left, mut centre, mut right) = (Vec::new(), Vec::new(), Vec::new());
        for &d in eigvals {
            let (l, c, r) = stencil(d * plan.dt / dx, plan.scheme);
            left.push(l);
            centre.push(c);
            right.push(r);
        }
        Self {
            left,
            centre,
            right,
            scratch: vec![0.0; len],
        }
    }

    fn apply(&mut self, field: &mut CoefficientField) {
        let n = field.n_basis;
        let nx = field.grid.nx;
        let src = &field.data;
        let (left, centre, right) = (&self.left, &self.centre, &self.right);
        self.scratch
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, out)| {
                let jl = if j == 0 { nx - 1 } else { j - 1 };
                let jr = if j + 1 == nx { 0 } else { j + 1 };
                let (pl, pc, pr) = (
                    &src[jl * n..jl * n + n],
                    &src[j * n..j * n + n],
                    &src[jr * n..jr * n + n],
                );
                for i in 0..n {
                    out[i] = left[i] * pl[i] + centre[i] * pc[i] + right[i] * pr[i];
                }
            });
        std::mem::swap(&mut field.data, &mut self.scratch);
    }
}

/// One streaming step of the characteristic field `b` with speeds `eigvals`.
pub fn stream_step(
    b: &CoefficientField,
    eigvals: &[f64],
    plan: &StepPlan,
) -> Result<CoefficientField> {
    if eigvals.len() != b.n_basis {
        return Err(Error::DimensionMismatch {
            expected: b.n_basis,
            actual: eigvals.len(),
        });
    }
    let dx = b.grid.dx();
    let max_speed = eigvals.iter().fold(0.0f64, |a, &d| a.max(d.abs()));
    let courant = max_speed * plan.dt / dx;
    if courant > 1.0 + CFL_SLACK {
        return Err(Error::CflViolation { courant });
    }
    let mut out = b.clone();
    Streamer::new(eigvals, plan, dx, b.data.len()).apply(&mut out);
    Ok(out)
}

/// `a(x_j) <- R(x_j) a(x_j)`, or the half-step propagator when `half`.
pub fn force_step(
    field: &CoefficientField,
    forcing: &ForcingOperator,
    half: bool,
) -> Result<CoefficientField> {
    if forcing.nx() != field.grid.nx {
        return Err(Error::GridMismatch(format!(
            "forcing has {} points, field has {}",
            forcing.nx(),
            field.grid.nx
        )));
    }
    if let Some(r) = forcing.rotations.first() {
        if r.nrows() != field.n_basis {
            return Err(Error::DimensionMismatch {
                expected: field.n_basis,
                actual: r.nrows(),
            });
        }
    }
    let mut out = field.clone();
    out.apply_per_point(if half {
        &forcing.half_rotations
    } else {
        &forcing.rotations
    });
    Ok(out)
}

/// Receives the physical field at scheduled steps.
pub trait Observer {
    fn observe(&mut self, step: usize, time: f64, field: &CoefficientField) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(usize, f64, &CoefficientField) -> Result<()>,
{
    fn observe(&mut self, step: usize, time: f64, field: &CoefficientField) -> Result<()> {
        self(step, time, field)
    }
}

/// Steps at which observers are called: every `every` steps (if nonzero),
/// the listed extra steps, and always the first and last step.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    pub every: usize,
    pub extra: BTreeSet<usize>,
}

impl Schedule {
    pub fn every(every: usize) -> Self {
        Self {
            every,
            extra: BTreeSet::new(),
        }
    }

    pub fn with_steps(mut self, steps: impl IntoIterator<Item = usize>) -> Self {
        self.extra.extend(steps);
        self
    }

    fn contains(&self, step: usize, last: usize) -> bool {
        step == 0
            || step == last
            || (self.every > 0 && step % self.every == 0)
            || self.extra.contains(&step)
    }
}

/// Evolves `initial` to `t_end` and returns the final physical field.
pub fn evolve(
    initial: &CoefficientField,
    ops: &OperatorSet,
    plan: &StepPlan,
    t_end: f64,
    schedule: &Schedule,
    observers: &mut [&mut dyn Observer],
) -> Result<CoefficientField> {
    if initial.n_basis != ops.n_basis() {
        return Err(Error::DimensionMismatch {
            expected: ops.n_basis(),
            actual: initial.n_basis,
        });
    }
    if initial.grid != ops.grid {
        return Err(Error::GridMismatch(
            "field and operators use different grids".into(),
        ));
    }
    if (plan.dt - ops.forcing.dt).abs() > 1e-15 * plan.dt {
        return Err(invalid(
            "dt",
            "operators were built for a different time step",
        ));
    }
    let dx = ops.grid.dx();
    let courant = ops.advection.max_speed() * plan.dt / dx;
    if courant > 1.0 + CFL_SLACK {
        return Err(Error::CflViolation { courant });
    }
    let steps = plan.steps_for(t_end)?;
    let t = &ops.advection.eigvecs;

    let notify =
        |step: usize, b: &CoefficientField, observers: &mut [&mut dyn Observer]| -> Result<()> {
            if observers.is_empty() {
                return Ok(());
            }
            let a = from_characteristic(b, t)?;
            for obs in observers.iter_mut() {
                obs.observe(step, step as f64 * plan.dt, &a)?;
            }
            Ok(())
        };

    let mut b = to_characteristic(initial, t)?;
    notify(0, &b, observers)?;
    if steps == 0 {
        return Ok(initial.clone());
    }
    let mut streamer = Streamer::new(&ops.advection.eigvals, plan, dx, b.data.len());

    match plan.splitting {
        Splitting::FirstOrder => {
            for step in 1..=steps {
                b.apply_per_point(&ops.char_full);
                streamer.apply(&mut b);
                check_finite(&b, step)?;
                if schedule.contains(step, steps) {
                    notify(step, &b, observers)?;
                }
            }
        }
        Splitting::Strang => {
            b.apply_per_point(&ops.char_half);
            for step in 1..=steps {
                streamer.apply(&mut b);
                let observed = schedule.contains(step, steps);
                if observed || step == steps {
                    b.apply_per_point(&ops.char_half);
                    check_finite(&b, step)?;
                    if observed {
                        notify(step, &b, observers)?;
                    }
                    if step < steps {
                        b.apply_per_point(&ops.char_half);
                    }
                } else {
                    b.apply_per_point(&ops.char_double_half);
                    check_finite(&b, step)?;
                }
            }
        }
    }
    from_characteristic(&b, t)
}

fn check_finite(field: &CoefficientField, step: usize) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}
