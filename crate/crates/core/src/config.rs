//! TOML run configuration, presets, and `key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::{BasisFamily, BasisSpec};
use crate::dynamics::{Scheme, Splitting};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::operators::ForcingMethod;
use crate::potential::PotentialSpec;

pub const DEFAULT_COURANT: f64 = 0.9;

const PRESETS: &[(&str, &str)] = &[
    ("harmonic", include_str!("../presets/harmonic.toml")),
    ("anharmonic", include_str!("../presets/anharmonic.toml")),
    ("double-well", include_str!("../presets/double-well.toml")),
    ("convergence", include_str!("../presets/convergence.toml")),
    ("stability", include_str!("../presets/stability.toml")),
    ("appendix-b", include_str!("../presets/appendix-b.toml")),
    ("free", include_str!("../presets/free.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub basis: BasisConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub n_basis: usize,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub b_strength: f64,
    #[serde(default = "symmetric")]
    pub family: BasisFamily,
}

/// Either `nx` or `dx` fixes the resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
}

/// Either a target Courant number or an explicit `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub courant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to `[0, t_end]`.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Steps between moment samples.
    #[serde(default = "ten")]
    pub moment_every: usize,
    /// Steps between density samples; 0 writes densities at snapshot times only.
    #[serde(default)]
    pub density_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "lax_wendroff")]
    pub scheme: Scheme,
    #[serde(default = "strang")]
    pub splitting: Splitting,
    #[serde(default = "cayley")]
    pub forcing: ForcingMethod,
    /// Permits the non-unitary forcing methods in time-stepping runs.
    #[serde(default)]
    pub allow_unsafe: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::LaxWendroff,
            splitting: Splitting::Strang,
            forcing: ForcingMethod::Cayley,
            allow_unsafe: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenSource {
    /// Closed-form harmonic-oscillator eigenstates.
    Harmonic,
    /// Eigenstates of the run potential by Hamiltonian diagonalization.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub source: EigenSource,
    /// Harmonic basis size for numerical eigenstates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_b: Option<usize>,
    /// `(eigen index, weight)` pairs; weights are normalized on load.
    pub states: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub dx: Vec<f64>,
    pub n_basis: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub methods: Vec<ForcingMethod>,
    /// Per-method grid spacing; methods not listed use the run grid.
    #[serde(default)]
    pub dx: BTreeMap<String, f64>,
    #[serde(default = "default_courant")]
    pub courant: f64,
    #[serde(default)]
    pub asymmetric_demo: bool,
    #[serde(default = "thousand")]
    pub demo_steps: usize,
    #[serde(default = "five")]
    pub demo_n_basis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub n_b_min: usize,
    pub n_b_max: usize,
    #[serde(default = "two")]
    pub count: usize,
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn five() -> usize {
    5
}
fn ten() -> usize {
    10
}
fn thousand() -> usize {
    1000
}
fn default_courant() -> f64 {
    DEFAULT_COURANT
}
fn symmetric() -> BasisFamily {
    BasisFamily::SymmetricHermite
}
fn lax_wendroff() -> Scheme {
    Scheme::LaxWendroff
}
fn strang() -> Splitting {
    Splitting::Strang
}
fn cayley() -> ForcingMethod {
    ForcingMethod::Cayley
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl StabilityConfig {
    /// Grid spacing override for `method`, if any.
    pub fn dx_for(&self, method: ForcingMethod) -> Option<f64> {
        self.dx.get(method.name()).copied()
    }
}

impl RunConfig {
    /// Parses, applies defaults, and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// As [`Self::from_toml`], with `key=value` overrides applied first.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let doc = if overrides.is_empty() {
            text.to_string()
        } else {
            let mut table: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| config_error(&error_key(&e), e.to_string()))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            toml::to_string(&table).map_err(|e| config_error("<document>", e.to_string()))?
        };
        let mut cfg: RunConfig = toml::from_str(&doc)
            .map_err(|e: toml::de::Error| config_error(&error_key(&e), e.to_string()))?;
        cfg.normalize_and_validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error("<document>", e.to_string()))
    }

    pub fn basis_spec(&self) -> Result<BasisSpec> {
        BasisSpec::new(
            self.basis.family,
            self.basis.n_basis,
            self.basis.epsilon,
            self.basis.b_strength,
        )
        .map_err(|e| config_error("basis", e.to_string()))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        self.grid.resolve()
    }

    /// Grid with `dx` replaced, keeping the domain.
    pub fn grid_with_spacing(&self, dx: f64) -> Result<GridSpec> {
        GridSpec::with_spacing(self.grid.x_min, self.grid.x_max, dx)
            .map_err(|e| config_error("grid.dx", e.to_string()))
    }

    fn normalize_and_validate(&mut self) -> Result<()> {
        self.potential
            .build()
            .map_err(|e| config_error("potential", e.to_string()))?;
        self.basis_spec()?;
        if self.basis.family != BasisFamily::SymmetricHermite {
            return Err(config_error(
                "basis.family",
                "time-stepping runs need the symmetric Hermite basis; the asymmetric basis is only used by the stability demo",
            ));
        }
        self.grid_spec()?;

        let t = &mut self.time;
        if !(t.t_end > 0.0 && t.t_end.is_finite()) {
            return Err(config_error(
                "time.t_end",
                format!("must be positive, got {}", t.t_end),
            ));
        }
        match (t.courant, t.dt) {
            (Some(_), Some(_)) => {
                return Err(config_error(
                    "time",
                    "set either `courant` or `dt`, not both",
                ))
            }
            (None, None) => t.courant = Some(DEFAULT_COURANT),
            _ => {}
        }
        if let Some(c) = t.courant {
            if !(c > 0.0 && c <= 1.0) {
                return Err(config_error(
                    "time.courant",
                    format!("must lie in (0, 1], got {c}"),
                ));
            }
        }
        if let Some(dt) = t.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(config_error(
                    "time.dt",
                    format!("must be positive, got {dt}"),
                ));
            }
        }
        if t.snapshot_times.is_empty() {
            t.snapshot_times = vec![0.0, t.t_end];
        }
        if let Some(&bad) = t
            .snapshot_times
            .iter()
            .find(|&&s| !(0.0..=t.t_end).contains(&s))
        {
            return Err(config_error(
                "time.snapshot_times",
                format!("{bad} lies outside [0, {}]", t.t_end),
            ));
        }
        if t.moment_every == 0 {
            return Err(config_error("time.moment_every", "must be at least 1"));
        }

        if !self.numerics.forcing.is_unitary() && !self.numerics.allow_unsafe {
            return Err(config_error(
                "numerics.forcing",
                format!(
                    "`{}` is not unitary; set numerics.allow_unsafe = true to run it anyway",
                    self.numerics.forcing.name()
                ),
            ));
        }

        let init = &mut self.initial;
        if init.states.is_empty() {
            return Err(config_error(
                "initial.states",
                "need at least one (index, weight) pair",
            ));
        }
        if init.states.iter().any(|s| !s.1.is_finite()) {
            return Err(config_error("initial.states", "weights must be finite"));
        }
        let norm_sq: f64 = init.states.iter().map(|s| s.1 * s.1).sum();
        if !(norm_sq > 0.0) {
            return Err(config_error(
                "initial.states",
                "weights cannot be normalized (all zero)",
            ));
        }
        // idempotent, so a written manifest reloads unchanged
        if (norm_sq - 1.0).abs() > 4.0 * f64::EPSILON {
            let norm = norm_sq.sqrt();
            for s in &mut init.states {
                s.1 /= norm;
            }
        }
        let max_index = init.states.iter().map(|s| s.0).max().unwrap_or(0);
        match init.source {
            EigenSource::Harmonic => {}
            EigenSource::Numerical => {
                let n_b = init.n_b.ok_or_else(|| {
                    config_error("initial.n_b", "numerical eigenstates need a basis size")
                })?;
                if n_b < 2 || n_b <= max_index {
                    return Err(config_error(
                        "initial.n_b",
                        format!("need n_b >= max(2, {}), got {n_b}", max_index + 1),
                    ));
                }
                if self.potential.quartic_parameters().is_none() {
                    return Err(config_error(
                        "potential",
                        "numerical eigenstates need a potential of the form c x^2 + K x^4",
                    ));
                }
            }
        }

        if let Some(c) = &self.convergence {
            if c.dx.is_empty() || c.n_basis.is_empty() {
                return Err(config_error(
                    "convergence",
                    "need at least one dx and one n_basis",
                ));
            }
            if let Some(bad) = c.dx.iter().find(|&&d| !(d > 0.0)) {
                return Err(config_error(
                    "convergence.dx",
                    format!("spacing must be positive, got {bad}"),
                ));
            }
            for &d in &c.dx {
                self.grid_with_spacing(d)?;
            }
            if c.n_basis.contains(&0) {
                return Err(config_error(
                    "convergence.n_basis",
                    "basis sizes must be positive",
                ));
            }
        }
        if let Some(s) = &self.stability {
            if s.methods.is_empty() {
                return Err(config_error(
                    "stability.methods",
                    "need at least one method",
                ));
            }
            if !(s.courant > 0.0 && s.courant <= 1.0) {
                return Err(config_error(
                    "stability.courant",
                    format!("must lie in (0, 1], got {}", s.courant),
                ));
            }
            for (name, &d) in &s.dx {
                name.parse::<ForcingMethod>().map_err(|_| {
                    config_error("stability.dx", format!("unknown method `{name}`"))
                })?;
                self.grid_with_spacing(d)?;
            }
            if s.demo_n_basis < 2 {
                return Err(config_error("stability.demo_n_basis", "need at least 2"));
            }
        }
        if let Some(e) = &self.eigen {
            if e.n_b_min < 2 || e.n_b_max < e.n_b_min {
                return Err(config_error(
                    "eigen",
                    format!(
                        "need 2 <= n_b_min <= n_b_max, got {}..{}",
                        e.n_b_min, e.n_b_max
                    ),
                ));
            }
            if e.count == 0 || e.count > e.n_b_min {
                return Err(config_error(
                    "eigen.count",
                    format!("need 1 <= count <= n_b_min, got {}", e.count),
                ));
            }
            if self.potential.quartic_parameters().is_none() {
                return Err(config_error(
                    "potential",
                    "the eigen report needs a potential of the form c x^2 + K x^4",
                ));
            }
        }
        Ok(())
    }
}

impl GridConfig {
    pub fn resolve(&self) -> Result<GridSpec> {
        let grid = match (self.nx, self.dx) {
            (Some(nx), None) => GridSpec::new(self.x_min, self.x_max, nx),
            (None, Some(dx)) => GridSpec::with_spacing(self.x_min, self.x_max, dx),
            (Some(_), Some(_)) => {
                return Err(config_error("grid", "set either `nx` or `dx`, not both"))
            }
            (None, None) => return Err(config_error("grid", "missing `nx` or `dx`")),
        };
        grid.map_err(|e| config_error("grid", e.to_string()))
    }
}

/// Best-effort key path for a deserialization error.
fn error_key(e: &toml::de::Error) -> String {
    let msg = e.message();
    for marker in ["missing field `", "unknown field `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "<document>".to_string()
}

/// Sets `a.b.c = value` in a parsed document. The value is read as TOML and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(config_error(assignment, "empty key"));
    }
    let value = parse_value(raw);
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| {
            config_error(
                "preset",
                format!(
                    "unknown preset `{name}`; available: {}",
                    preset_names().join(", ")
                ),
            )
        })
}

pub fn preset(name: &str) -> Result<RunConfig> {
    RunConfig::from_toml(preset_text(name)?)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    load_config_with(path, &[])
}

pub fn load_config_with(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    RunConfig::from_toml_with(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_preset_values() {
        let cfg = preset("harmonic").unwrap();
        assert_eq!(cfg.potential.quartic_parameters(), Some((0.5, 0.0)));
        assert_eq!(cfg.basis.n_basis, 16);
        let g = cfg.grid_spec().unwrap();
        assert_eq!((g.x_min, g.x_max), (-3.5, 3.5));
        assert!((g.dx() - 0.02).abs() < 1e-15);
        assert_eq!(cfg.time.courant, Some(DEFAULT_COURANT));
        let w = 0.5f64.sqrt();
        assert_eq!(cfg.initial.states.len(), 2);
        for (s, k) in cfg.initial.states.iter().zip(0..) {
            assert_eq!(s.0, k);
            assert!((s.1 - w).abs() < 1e-15);
        }
    }

    #[test]
    fn every_preset_loads_and_round_trips() {
        for name in preset_names() {
            let cfg = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(cfg, again, "{name}");
        }
    }

    #[test]
    fn missing_potential_names_the_key() {
        let text = preset_text("harmonic").unwrap();
        let stripped: String = text
            .lines()
            .skip_while(|l| !l.starts_with("[potential]"))
            .skip(1)
            .skip_while(|l| !l.starts_with('['))
            .collect::<Vec<_>>()
            .join("\n");
        match RunConfig::from_toml(&stripped) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "potential"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = format!("{}\n[extra]\nfoo = 1\n", preset_text("harmonic").unwrap());
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
        let bad = preset_text("harmonic")
            .unwrap()
            .replace("n_basis = 16", "n_basis = 16\nnbasis = 3");
        let err = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("nbasis") && err.contains("line"), "{err}");
    }

    #[test]
    fn invalid_ranges() {
        let base = preset_text("harmonic").unwrap();
        let cases = [
            ("time.courant=1.5", "time.courant"),
            ("time.t_end=-1.0", "time.t_end"),
            ("time.snapshot_times=[0.0, 100.0]", "time.snapshot_times"),
            ("initial.states=[[0, 0.0]]", "initial.states"),
            ("numerics.forcing=\"euler\"", "numerics.forcing"),
            ("grid.dx=0.3", "grid"),
            ("basis.epsilon=0.0", "basis"),
        ];
        for (o, key) in cases {
            match RunConfig::from_toml_with(base, &[o.to_string()]) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{o}"),
                other => panic!("{o}: expected config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn overrides_apply_to_nested_keys() {
        let base = preset_text("harmonic").unwrap();
        let cfg = RunConfig::from_toml_with(
            base,
            &[
                "basis.n_basis=32".into(),
                "output.dir=elsewhere".into(),
                "numerics.scheme=\"upwind\"".into(),
                "initial.states=[[0, 3.0], [2, 4.0]]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.basis.n_basis, 32);
        assert_eq!(cfg.output.dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.numerics.scheme, Scheme::Upwind);
        assert_eq!(
            cfg.initial.states.iter().map(|s| s.0).collect::<Vec<_>>(),
            [0, 2]
        );
        assert!((cfg.initial.states[0].1 - 0.6).abs() < 1e-15);
        assert!((cfg.initial.states[1].1 - 0.8).abs() < 1e-15);
        assert!(RunConfig::from_toml_with(base, &["novalue".into()]).is_err());
    }

    #[test]
    fn exclusive_choices() {
        let base = preset_text("harmonic").unwrap();
        assert!(RunConfig::from_toml_with(base, &["grid.nx=350".into()]).is_err());
        assert!(RunConfig::from_toml_with(base, &["time.dt=0.001".into()]).is_err());
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("nope"), Err(Error::Config { .. })));
    }
}
