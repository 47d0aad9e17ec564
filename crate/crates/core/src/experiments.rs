//! Config-driven runs and studies, in memory and as files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::BasisSpec;
use crate::config::{EigenSource, RunConfig};
use crate::dynamics::{evolve, CoefficientField, Schedule, StepPlan};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::observables::{
    density, error_metric, fit_slope, moments, reconstruct, MomentReport, WignerSnapshot,
};
use crate::operators::{
    amplification_factor, asymmetric_propagator, AdvectionOperator, ForcingMethod, ForcingOperator,
    OperatorSet, PseudoDiffAssembler,
};
use crate::output::{fmt_g17, OutputDir};
use crate::potential::PolynomialPotential;
use crate::states::{
    eigen_convergence, initial_coefficients, numerical_wigner_grid, solve_eigenstates, EigenResult,
    WaveState,
};

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// A configured run with operators and initial field built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub spec: BasisSpec,
    pub grid: GridSpec,
    pub potential: PolynomialPotential,
    pub plan: StepPlan,
    pub steps: usize,
    pub ops: OperatorSet,
    pub state: WaveState,
    pub eigen: Option<EigenResult>,
    pub initial: CoefficientField,
    /// The quantum state itself evolves exactly, so `W_ex(t)` is available.
    pub has_oracle: bool,
}

/// Builds everything a run of `cfg` needs.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let spec = cfg.basis_spec()?;
    let grid = cfg.grid_spec()?;
    let potential = cfg.potential.build()?;
    let n = spec.n_basis;
    let max_speed = AdvectionOperator::new(n)?.max_speed();
    let num = &cfg.numerics;
    let plan = match (cfg.time.courant, cfg.time.dt) {
        (_, Some(dt)) => StepPlan::new(dt, num.scheme, num.splitting, max_speed, grid.dx())?,
        (Some(c), None) => StepPlan::for_duration(
            cfg.time.t_end,
            c,
            num.scheme,
            num.splitting,
            max_speed,
            grid.dx(),
        )?,
        (None, None) => return Err(config_error("time", "missing `courant` or `dt`")),
    };
    let steps = plan.steps_for(cfg.time.t_end)?;
    let ops = OperatorSet::new(
        &spec,
        &potential,
        &grid,
        plan.dt,
        num.forcing,
        num.allow_unsafe,
    )?;

    let terms: Vec<(usize, Complex64)> = cfg
        .initial
        .states
        .iter()
        .map(|&(k, w)| (k, Complex64::new(w, 0.0)))
        .collect();
    let unit_scales = spec.epsilon == 1.0 && spec.b_strength == 1.0;
    let quartic = cfg.potential.quartic_parameters();
    let (state, eigen, has_oracle) = match cfg.initial.source {
        EigenSource::Harmonic => {
            let state = WaveState::harmonic(&terms)?;
            (state, None, unit_scales && quartic == Some((0.5, 0.0)))
        }
        EigenSource::Numerical => {
            let (c, k) = quartic.ok_or_else(|| {
                config_error("potential", "numerical eigenstates need c x^2 + K x^4")
            })?;
            let n_b = cfg.initial.n_b.ok_or_else(|| {
                config_error("initial.n_b", "numerical eigenstates need a basis size")
            })?;
            let count = terms.iter().map(|t| t.0 + 1).max().unwrap_or(1);
            let eig = solve_eigenstates(c, k, n_b, count)?;
            let state = WaveState::from_eigen(&eig, &terms)?;
            let confining = k > 0.0 || (k == 0.0 && c > 0.0);
            (state, Some(eig), unit_scales && confining)
        }
    };
    let initial = initial_coefficients(&state, &spec, &grid)?;
    Ok(Prepared {
        config: cfg.clone(),
        spec,
        grid,
        potential,
        plan,
        steps,
        ops,
        state,
        eigen,
        initial,
        has_oracle,
    })
}

impl Prepared {
    /// `W_ex(t)` on the shared x = v grid.
    pub fn exact_snapshot(&self, time: f64) -> Result<Option<WignerSnapshot>> {
        if !self.has_oracle {
            return Ok(None);
        }
        let xs = self.grid.points();
        let w = numerical_wigner_grid(&self.state, time, &xs, &xs, self.spec.epsilon)?;
        WignerSnapshot::new(time, xs.clone(), xs, w).map(Some)
    }

    /// Step nearest to `t`.
    pub fn step_at(&self, t: f64) -> usize {
        ((t / self.plan.dt).round() as usize).min(self.steps)
    }
}

#[derive(Debug, Clone)]
pub struct SnapshotResult {
    pub requested_time: f64,
    pub step: usize,
    pub wigner: WignerSnapshot,
    pub exact: Option<WignerSnapshot>,
    /// RMS error against `exact`.
    pub delta: Option<f64>,
    pub max_abs_error: Option<f64>,
}

impl SnapshotResult {
    pub fn time(&self) -> f64 {
        self.wigner.time
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub plan: StepPlan,
    pub steps: usize,
    pub snapshots: Vec<SnapshotResult>,
    pub moments: Vec<MomentReport>,
    /// `(t, mass)` at every moment sample.
    pub masses: Vec<(f64, f64)>,
    pub densities: Vec<(f64, Vec<f64>)>,
    pub final_field: CoefficientField,
    pub elapsed: Duration,
}

impl SimulationResult {
    /// Largest `|mass(t) - mass(0)|` over the samples.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.masses.first().map_or(0.0, |m| m.1);
        self.masses
            .iter()
            .fold(0.0f64, |a, m| a.max((m.1 - m0).abs()))
    }
}

/// Runs the prepared simulation and collects its observables.
pub fn simulate(prep: &Prepared) -> Result<SimulationResult> {
    let started = Instant::now();
    let cfg = &prep.config.time;
    let last = prep.steps;
    let snapshot_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|&t| prep.step_at(t))
        .collect();
    let density_steps: BTreeSet<usize> = if cfg.density_every == 0 {
        snapshot_steps.iter().copied().collect()
    } else {
        (0..=last)
            .step_by(cfg.density_every)
            .chain([last])
            .collect()
    };
    let wanted_snapshots: BTreeSet<usize> = snapshot_steps.iter().copied().collect();
    let schedule = Schedule::every(cfg.moment_every)
        .with_steps(wanted_snapshots.iter().copied())
        .with_steps(density_steps.iter().copied());

    let xs = prep.grid.points();
    let mut reports = Vec::new();
    let mut masses = Vec::new();
    let mut densities = Vec::new();
    let mut fields: BTreeMap<usize, WignerSnapshot> = BTreeMap::new();
    let mut observer = |step: usize, t: f64, field: &CoefficientField| -> Result<()> {
        if step % cfg.moment_every == 0 || step == last {
            let m = moments(field, &prep.ops, t)?;
            masses.push((t, m.mass));
            reports.push(m);
        }
        if density_steps.contains(&step) {
            densities.push((t, density(field, &prep.ops.basis_integrals)?));
        }
        if wanted_snapshots.contains(&step) {
            fields.insert(step, reconstruct(field, &xs, t)?);
        }
        Ok(())
    };
    let final_field = evolve(
        &prep.initial,
        &prep.ops,
        &prep.plan,
        prep.config.time.t_end,
        &schedule,
        &mut [&mut observer],
    )?;

    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    for (&requested_time, &step) in cfg.snapshot_times.iter().zip(&snapshot_steps) {
        let wigner = fields[&step].clone();
        let exact = prep.exact_snapshot(wigner.time)?;
        let (delta, max_abs_error) = match &exact {
            Some(ex) => (
                Some(error_metric(&wigner, ex)?),
                Some(wigner.difference(ex)?.max_abs()),
            ),
            None => (None, None),
        };
        snapshots.push(SnapshotResult {
            requested_time,
            step,
            wigner,
            exact,
            delta,
            max_abs_error,
        });
    }
    Ok(SimulationResult {
        plan: prep.plan,
        steps: prep.steps,
        snapshots,
        moments: reports,
        masses,
        densities,
        final_field,
        elapsed: started.elapsed(),
    })
}

/// Prepares, simulates, and writes every output file under `out_dir`.
pub fn run_simulation(cfg: &RunConfig, out_dir: &Path) -> Result<SimulationResult> {
    let manifest = cfg.to_toml()?;
    let out = OutputDir::create(out_dir, &manifest)?;
    let prep = prepare(cfg)?;
    let result = simulate(&prep)?;
    write_simulation(&out, &prep, &result)?;
    Ok(result)
}

pub fn write_simulation(out: &OutputDir, prep: &Prepared, result: &SimulationResult) -> Result<()> {
    let xs = prep.grid.points();
    let mut delta_rows = Vec::new();
    for (i, s) in result.snapshots.iter().enumerate() {
        let requested = format!("requested t = {}", fmt_g17(s.requested_time));
        out.write_snapshot(
            &format!("snapshot_{i:03}.csv"),
            &s.wigner,
            std::slice::from_ref(&requested),
        )?;
        if let (Some(ex), Some(delta), Some(max_abs)) = (&s.exact, s.delta, s.max_abs_error) {
            let diff = s.wigner.difference(ex)?;
            let note = vec![requested, format!("delta = {}", fmt_g17(delta))];
            out.write_snapshot(&format!("error_{i:03}.csv"), &diff, &note)?;
            delta_rows.push(vec![s.time(), delta, max_abs]);
        }
    }
    if !delta_rows.is_empty() {
        out.write_csv("delta.csv", &[], "t,delta,max_abs", &delta_rows)?;
    }
    out.write_moments("moments.csv", &result.moments)?;
    let mass_rows: Vec<Vec<f64>> = result.masses.iter().map(|m| vec![m.0, m.1]).collect();
    out.write_csv("mass.csv", &[], "t,mass", &mass_rows)?;
    out.write_density("density.csv", &xs, &result.densities)?;

    let mut summary = format!(
        "steps = {}\ndt = {}\ncourant = {}\nmass_drift = {}\nwall_clock_s = {:.3}\n",
        result.steps,
        fmt_g17(result.plan.dt),
        fmt_g17(result.plan.courant),
        fmt_g17(result.mass_drift()),
        result.elapsed.as_secs_f64()
    );
    if let Some(eig) = &prep.eigen {
        let energies: Vec<String> = eig.energies.iter().map(|e| fmt_g17(*e)).collect();
        summary.push_str(&format!("energies = [{}]\n", energies.join(", ")));
    }
    if let Some(d) = result.snapshots.last().and_then(|s| s.delta) {
        summary.push_str(&format!("final_delta = {}\n", fmt_g17(d)));
    }
    out.write_text("summary.txt", &summary)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub n_basis: usize,
    pub dx: f64,
    pub steps: usize,
    pub delta: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceResult {
    pub t_end: f64,
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of `log delta` against `log dx`, per basis size.
    pub slopes: Vec<(usize, f64)>,
}

impl ConvergenceResult {
    pub fn point(&self, n_basis: usize, dx: f64) -> Option<&ConvergencePoint> {
        self.points
            .iter()
            .find(|p| p.n_basis == n_basis && (p.dx - dx).abs() <= 1e-12 * dx)
    }

    pub fn slope(&self, n_basis: usize) -> Option<f64> {
        self.slopes.iter().find(|s| s.0 == n_basis).map(|s| s.1)
    }
}

/// Delta at `t_end` for every (N, dx) pair of the `[convergence]` table.
pub fn run_convergence_study(cfg: &RunConfig) -> Result<ConvergenceResult> {
    let table = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| config_error("convergence", "missing [convergence] table"))?;
    let t_end = cfg.time.t_end;
    let mut points = Vec::new();
    for &n in &table.n_basis {
        for &dx in &table.dx {
            let mut point_cfg = cfg.clone();
            point_cfg.basis.n_basis = n;
            point_cfg.grid.dx = Some(dx);
            point_cfg.grid.nx = None;
            point_cfg.time.snapshot_times = vec![t_end];
            point_cfg.time.moment_every = usize::MAX;
            point_cfg.time.density_every = 0;
            let prep = prepare(&point_cfg)?;
            if !prep.has_oracle {
                return Err(config_error(
                    "convergence",
                    "the study needs a run with an exact solution",
                ));
            }
            let result = simulate(&prep)?;
            let snap = result.snapshots.last().expect("one snapshot requested");
            points.push(ConvergencePoint {
                n_basis: n,
                dx: prep.grid.dx(),
                steps: result.steps,
                delta: snap.delta.expect("oracle present"),
                max_abs: snap.max_abs_error.expect("oracle present"),
            });
        }
    }
    let slopes = table
        .n_basis
        .iter()
        .map(|&n| {
            let (h, e): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|p| p.n_basis == n)
                .map(|p| (p.dx, p.delta))
                .unzip();
            (
                n,
                if h.len() >= 2 {
                    fit_slope(&h, &e)
                } else {
                    f64::NAN
                },
            )
        })
        .collect();
    Ok(ConvergenceResult {
        t_end,
        points,
        slopes,
    })
}

pub fn write_convergence(out: &OutputDir, result: &ConvergenceResult) -> Result<()> {
    let rows: Vec<Vec<f64>> = result
        .points
        .iter()
        .map(|p| vec![p.n_basis as f64, p.dx, p.steps as f64, p.delta, p.max_abs])
        .collect();
    let note = format!("t = {}", fmt_g17(result.t_end));
    out.write_csv(
        "convergence.csv",
        std::slice::from_ref(&note),
        "n_basis,dx,steps,delta,max_abs",
        &rows,
    )?;
    let slopes: Vec<Vec<f64>> = result
        .slopes
        .iter()
        .map(|s| vec![s.0 as f64, s.1])
        .collect();
    out.write_csv("slopes.csv", &[], "n_basis,slope", &slopes)?;
    Ok(())
}

/// `g(x_j)` of one forcing propagator.
#[derive(Debug, Clone)]
pub struct AmplificationCurve {
    pub method: ForcingMethod,
    pub dx: f64,
    pub dt: f64,
    pub xs: Vec<f64>,
    pub g: Vec<f64>,
}

impl AmplificationCurve {
    pub fn max(&self) -> f64 {
        self.g.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid point of the largest factor.
    pub fn argmax(&self) -> f64 {
        let mut best = 0;
        for (j, &g) in self.g.iter().enumerate() {
            if g > self.g[best] {
                best = j;
            }
        }
        self.xs[best]
    }
}

/// Forcing-only runs in the asymmetric and the symmetric basis.
#[derive(Debug, Clone)]
pub struct DemoResult {
    pub n_basis: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `||a(t)||` with `||a||^2 = dx sum_j sum_k a_k(x_j)^2`.
    pub asymmetric: Vec<f64>,
    pub symmetric: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StabilityResult {
    pub curves: Vec<AmplificationCurve>,
    pub demo: Option<DemoResult>,
}

/// Amplification factors per method and, if requested, the asymmetric-basis demo.
pub fn run_stability_study(cfg: &RunConfig) -> Result<StabilityResult> {
    let table = cfg
        .stability
        .as_ref()
        .ok_or_else(|| config_error("stability", "missing [stability] table"))?;
    let spec = cfg.basis_spec()?;
    let potential = cfg.potential.build()?;
    let assembler = PseudoDiffAssembler::new(&spec, &potential)?;
    let max_speed = AdvectionOperator::new(spec.n_basis)?.max_speed();
    let mut curves = Vec::with_capacity(table.methods.len());
    for &method in &table.methods {
        let grid = match table.dx_for(method) {
            Some(dx) => cfg.grid_with_spacing(dx)?,
            None => cfg.grid_spec()?,
        };
        let dt = table.courant * grid.dx() / max_speed;
        let xs = grid.points();
        let g = xs
            .par_iter()
            .map(|&x| amplification_factor(method, &assembler.at(x), dt))
            .collect::<Result<Vec<_>>>()?;
        curves.push(AmplificationCurve {
            method,
            dx: grid.dx(),
            dt,
            xs,
            g,
        });
    }
    let demo = if table.asymmetric_demo {
        if cfg.potential.quartic_parameters() != Some((0.5, 0.0))
            || spec.epsilon != 1.0
            || spec.b_strength != 1.0
        {
            return Err(config_error(
                "stability.asymmetric_demo",
                "the asymmetric-basis demo is defined for the harmonic potential c = 0.5 with unit scales",
            ));
        }
        Some(asymmetric_demo(
            &cfg.grid_spec()?,
            table.demo_n_basis,
            table.demo_steps,
            table.courant,
        )?)
    } else {
        None
    };
    Ok(StabilityResult { curves, demo })
}

/// Starts both bases from the harmonic ground state and applies only the
/// forcing step `steps` times.
pub fn asymmetric_demo(
    grid: &GridSpec,
    n: usize,
    steps: usize,
    courant: f64,
) -> Result<DemoResult> {
    let dx = grid.dx();
    let dt = courant * dx / AdvectionOperator::new(n)?.max_speed();
    let xs = grid.points();
    let props: Vec<_> = xs
        .iter()
        .map(|&x| asymmetric_propagator(n, x, dt))
        .collect();
    // W_0 = e^{-x^2 - v^2} / pi, and phi~_0 = e^{-v^2} / pi^{1/4}
    let mut asym = CoefficientField::from_fn(n, *grid, |k, j| {
        if k == 0 {
            std::f64::consts::PI.powf(-0.75) * (-xs[j] * xs[j]).exp()
        } else {
            0.0
        }
    })?;
    let spec = BasisSpec::hermite(n)?;
    let harmonic = PolynomialPotential::harmonic(0.5)?;
    let forcing = ForcingOperator::build(&spec, &harmonic, grid, dt, ForcingMethod::Cayley, false)?;
    let mut sym = initial_coefficients(
        &WaveState::harmonic(&[(0, Complex64::new(1.0, 0.0))])?,
        &spec,
        grid,
    )?;

    let norm = |f: &CoefficientField| f.l2_norm() * dx.sqrt();
    let mut times = vec![0.0];
    let mut asymmetric = vec![norm(&asym)];
    let mut symmetric = vec![norm(&sym)];
    for step in 1..=steps {
        asym.apply_per_point(&props);
        sym.apply_per_point(&forcing.rotations);
        if !asym.is_finite() || !sym.is_finite() {
            return Err(Error::NonFinite { step });
        }
        times.push(step as f64 * dt);
        asymmetric.push(norm(&asym));
        symmetric.push(norm(&sym));
    }
    Ok(DemoResult {
        n_basis: n,
        dt,
        times,
        asymmetric,
        symmetric,
    })
}

pub fn write_stability(out: &OutputDir, result: &StabilityResult) -> Result<()> {
    for c in &result.curves {
        let rows: Vec<Vec<f64>> = c.xs.iter().zip(&c.g).map(|(&x, &g)| vec![x, g]).collect();
        let notes = vec![
            format!("method = {}", c.method.name()),
            format!("dx = {}", fmt_g17(c.dx)),
            format!("dt = {}", fmt_g17(c.dt)),
        ];
        out.write_csv(
            &format!("amplification_{}.csv", c.method.name()),
            &notes,
            "x,g",
            &rows,
        )?;
    }
    if let Some(d) = &result.demo {
        let rows: Vec<Vec<f64>> = (0..d.times.len())
            .map(|i| vec![i as f64, d.times[i], d.asymmetric[i], d.symmetric[i]])
            .collect();
        let notes = vec![
            format!("n_basis = {}", d.n_basis),
            format!("dt = {}", fmt_g17(d.dt)),
        ];
        out.write_csv(
            "asymmetric_demo.csv",
            &notes,
            "step,t,norm_asymmetric,norm_symmetric",
            &rows,
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub c: f64,
    pub k: f64,
    /// `(N_b, log10 ||c(N_b + 2) - c(N_b)||` per state`)`.
    pub rows: Vec<(usize, Vec<f64>)>,
}

/// Coefficient-vector convergence for `N_b = n_b_min, n_b_min + 2, ..., n_b_max`.
pub fn run_eigen_report(cfg: &RunConfig) -> Result<EigenReport> {
    let table = cfg
        .eigen
        .as_ref()
        .ok_or_else(|| config_error("eigen", "missing [eigen] table"))?;
    let (c, k) = cfg
        .potential
        .quartic_parameters()
        .ok_or_else(|| config_error("potential", "the eigen report needs c x^2 + K x^4"))?;
    let sizes: Vec<usize> = (table.n_b_min..=table.n_b_max).step_by(2).collect();
    let rows = sizes
        .par_iter()
        .map(|&n_b| {
            let diffs = eigen_convergence(c, k, n_b, table.count)?;
            Ok((n_b, diffs.into_iter().map(f64::log10).collect()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenReport { c, k, rows })
}

pub fn write_eigen_report(out: &OutputDir, report: &EigenReport) -> Result<()> {
    let count = report.rows.first().map_or(0, |r| r.1.len());
    let mut header = String::from("n_b");
    for i in 0..count {
        header.push_str(&format!(",log10_diff_{i}"));
    }
    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|(n, d)| {
            std::iter::once(*n as f64)
                .chain(d.iter().copied())
                .collect()
        })
        .collect();
    let notes = vec![
        format!("c = {}", fmt_g17(report.c)),
        format!("K = {}", fmt_g17(report.k)),
    ];
    out.write_csv("eigen_convergence.csv", &notes, &header, &rows)?;
    Ok(())
}
