//! Scenario files: TOML, unknown keys rejected. The schema is described in
//! FORMATS.md.

use std::fmt;
use std::path::{Path, PathBuf};

use rhl_core::comparison::BarrierKind;
use rhl_core::flows::{cfl_limit, SphereModel};
use rhl_core::geometry::{ConformalMetric, GridSpec, ScalarField};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Sin,
    Cos,
    One,
}

impl Trig {
    fn eval(self, v: f64) -> f64 {
        match self {
            Trig::Sin => v.sin(),
            Trig::Cos => v.cos(),
            Trig::One => 1.0,
        }
    }
}

fn one() -> Trig {
    Trig::One
}

fn unit() -> i32 {
    1
}

/// `amplitude · x(kx·x) · y(ky·y)`
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub amplitude: f64,
    #[serde(default = "one")]
    pub x: Trig,
    #[serde(default = "unit")]
    pub kx: i32,
    #[serde(default = "one")]
    pub y: Trig,
    #[serde(default = "unit")]
    pub ky: i32,
}

/// `offset + Σ terms`, optionally exponentiated.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub terms: Vec<Term>,
    #[serde(default)]
    pub exponential: bool,
}

impl Profile {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let s = self.offset
            + self
                .terms
                .iter()
                .map(|t| t.amplitude * t.x.eval(t.kx as f64 * x) * t.y.eval(t.ky as f64 * y))
                .sum::<f64>();
        if self.exponential {
            s.exp()
        } else {
            s
        }
    }

    pub fn sample(&self, spec: GridSpec) -> ScalarField {
        ScalarField::from_fn(spec, |x, y| self.eval(x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Cells per axis on the `2π × 2π` torus.
    pub n: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub t_final: f64,
    /// Defaults to the CFL limit of `f0`.
    pub dt: Option<f64>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    pub f0: Profile,
    pub u0: Profile,
    /// Write the base-level trajectory next to the CSVs.
    #[serde(default)]
    pub save_trajectory: bool,
}

fn two() -> usize {
    2
}

fn unit_radius() -> f64 {
    1.0
}

fn default_theta_samples() -> usize {
    40
}

fn default_t_samples() -> usize {
    25
}

fn default_gaussian_seed() -> u64 {
    20240229
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereConfig {
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default = "unit_radius")]
    pub r: f64,
    #[serde(default = "default_theta_samples")]
    pub samples_theta: usize,
    #[serde(default = "default_t_samples")]
    pub samples_t: usize,
    /// Last sampled time; must stay below the blow-up time.
    pub t_max: f64,
    /// Seeded Euclidean heat-kernel `P(u)` samples; 0 skips the scan.
    #[serde(default)]
    pub gaussian_samples: usize,
    #[serde(default = "two")]
    pub gaussian_dimension: usize,
    #[serde(default = "default_gaussian_seed")]
    pub gaussian_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSource {
    /// Sharp value of the flat radial reduction.
    #[default]
    Flat,
    /// Smallest `α` passing the grid barrier check on this scenario.
    Grid,
}

/// Ledger entries that can be overridden, named as in the ledger table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum LedgerSymbol {
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "A")]
    AWeight,
    #[serde(rename = "b")]
    Normalizer,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "C")]
    C,
    /// The Laplacian-bound constant; takes `k = 0`.
    #[serde(rename = "B")]
    LaplacianB,
}

/// Replaces one ledger value after construction, bypassing its
/// certificate.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerOverride {
    pub symbol: LedgerSymbol,
    #[serde(default)]
    pub k: usize,
    pub value: f64,
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerConfig {
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default = "unit_radius")]
    pub a: f64,
    #[serde(default = "three")]
    pub k_max: usize,
    #[serde(default)]
    pub alpha: AlphaSource,
    #[serde(default)]
    pub overrides: Vec<LedgerOverride>,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self {
            n: 2,
            a: 1.0,
            k_max: 3,
            alpha: AlphaSource::Flat,
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Gradient,
    Hessian,
    Higher,
    Shi,
    Zhang,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    #[default]
    Standard,
    TimeUniform,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub id: EstimateKind,
    /// Derivative order for `higher` and `shi`.
    pub k: Option<usize>,
    #[serde(default)]
    pub mode: ModeConfig,
    /// Overrides the ledger constant; required for `shi`.
    pub constant: Option<f64>,
}

fn default_barrier_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    /// `psi1`, `phi2`, ...
    pub kind: String,
    /// Calibrated when absent.
    pub alpha: Option<f64>,
    #[serde(default = "default_barrier_tolerance")]
    pub tolerance: f64,
}

fn default_entropy_tolerance() -> f64 {
    2e-3
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    /// Conjugate data at `T`, normalised to unit mass before solving.
    /// Required on grids; the sphere uses the uniform density.
    pub final_density: Option<Profile>,
    #[serde(default)]
    pub tau_min: f64,
    #[serde(default = "default_entropy_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Ball radius for estimates, barriers and Bernstein checks.
    #[serde(default = "unit_radius")]
    pub r: f64,
    /// Ball centre as grid indices; defaults to the grid centre.
    pub x0: Option<[usize; 2]>,
    #[serde(default)]
    pub estimates: Vec<EstimateConfig>,
    #[serde(default)]
    pub identity_orders: Vec<usize>,
    #[serde(default)]
    pub bernstein_orders: Vec<usize>,
    #[serde(default)]
    pub barriers: Vec<BarrierConfig>,
    pub entropy: Option<EntropyConfig>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            r: 1.0,
            x0: None,
            estimates: Vec::new(),
            identity_orders: Vec::new(),
            bernstein_orders: Vec::new(),
            barriers: Vec::new(),
            entropy: None,
        }
    }
}

fn one_level() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    /// Level `l` runs on `n·2^l` cells with `dt/4^l`.
    #[serde(default = "one_level")]
    pub levels: usize,
    /// Allowed coarse/fine ratio of the first-order identity residual.
    pub identity_ratio: Option<[f64; 2]>,
    /// Minimum observed order of the conjugate identity residual.
    pub conjugate_min_order: Option<f64>,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            levels: 1,
            identity_ratio: None,
            conjugate_min_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub output_dir: Option<PathBuf>,
    pub grid: Option<GridConfig>,
    pub flow: Option<FlowConfig>,
    pub sphere: Option<SphereConfig>,
    #[serde(default)]
    pub ledger: LedgerConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub refinement: RefinementConfig,
}

/// What the scenario evolves.
#[derive(Debug, Clone, PartialEq)]
pub enum Testbed {
    Grid {
        spec: GridSpec,
        flow: FlowConfig,
        /// Resolved step, at most the CFL limit.
        dt: f64,
        x0: (usize, usize),
    },
    Sphere(SphereConfig),
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// The configuration text, echoed into saved trajectories.
    pub source: String,
    pub output_dir: Option<PathBuf>,
    pub testbed: Testbed,
    pub ledger: LedgerConfig,
    pub checks: ChecksConfig,
    pub barriers: Vec<(BarrierKind, BarrierConfig)>,
    pub refinement: RefinementConfig,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn parse_barrier_kind(s: &str) -> Option<BarrierKind> {
    let (ctor, digits): (fn(usize) -> BarrierKind, &str) = if let Some(rest) = s.strip_prefix("psi") {
        (BarrierKind::Psi, rest)
    } else {
        (BarrierKind::Phi, s.strip_prefix("phi")?)
    };
    match digits.parse::<usize>() {
        Ok(m) if m >= 1 => Some(ctor(m)),
        _ => None,
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

/// Parses and validates scenario text.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate(file, text)
}

pub fn load_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn validate(file: ScenarioFile, text: &str) -> Result<Scenario, ConfigError> {
    if file.name.trim().is_empty() || file.name.contains(['/', '\\']) {
        return Err(invalid("name", "must be a non-empty plain file name"));
    }
    let ledger = file.ledger;
    if ledger.n < 2 {
        return Err(invalid("ledger.n", "dimension must be at least 2"));
    }
    positive("ledger.a", ledger.a)?;
    if ledger.k_max == 0 || ledger.k_max > 3 {
        return Err(invalid("ledger.k_max", "must be in 1..=3"));
    }
    for o in &ledger.overrides {
        if o.symbol == LedgerSymbol::LaplacianB {
            if o.k != 0 {
                return Err(invalid("ledger.overrides.k", "B is a single constant; use k = 0"));
            }
        } else if o.k == 0 || o.k > ledger.k_max {
            return Err(invalid("ledger.overrides.k", format!("order {} outside 1..={}", o.k, ledger.k_max)));
        }
    }
    if file.refinement.levels == 0 {
        return Err(invalid("refinement.levels", "must be at least 1"));
    }
    let checks = file.checks;
    positive("checks.r", checks.r)?;
    for &k in &checks.identity_orders {
        if k == 0 || k > 3 {
            return Err(invalid("checks.identity_orders", format!("order {k} outside 1..=3")));
        }
    }
    for &m in &checks.bernstein_orders {
        if m == 0 || m > ledger.k_max {
            return Err(invalid("checks.bernstein_orders", format!("order {m} outside 1..={}", ledger.k_max)));
        }
    }
    for e in &checks.estimates {
        match e.id {
            EstimateKind::Higher | EstimateKind::Shi if e.k.is_none() => {
                return Err(invalid("checks.estimates.k", "required for higher and shi"));
            }
            EstimateKind::Higher if !(2..=ledger.k_max).contains(&e.k.unwrap_or(0)) => {
                return Err(invalid("checks.estimates.k", format!("higher order must be in 2..={}", ledger.k_max)));
            }
            EstimateKind::Shi if e.constant.is_none() => {
                return Err(invalid("checks.estimates.constant", "required for shi"));
            }
            _ => {}
        }
        if let Some(c) = e.constant {
            positive("checks.estimates.constant", c)?;
        }
    }
    let mut barriers = Vec::new();
    for b in &checks.barriers {
        let kind = parse_barrier_kind(&b.kind)
            .ok_or_else(|| invalid("checks.barriers.kind", format!("unknown barrier `{}`", b.kind)))?;
        if kind.order() > ledger.k_max {
            return Err(invalid("checks.barriers.kind", format!("order {} exceeds ledger.k_max", kind.order())));
        }
        if let Some(a) = b.alpha {
            positive("checks.barriers.alpha", a)?;
        }
        if !(b.tolerance >= 0.0) {
            return Err(invalid("checks.barriers.tolerance", "must be nonnegative"));
        }
        barriers.push((kind, b.clone()));
    }

    let testbed = match (file.grid, file.flow, file.sphere) {
        (Some(grid), Some(flow), None) => {
            let spec = GridSpec::new(grid.n, grid.n, 2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI)
                .map_err(|e| invalid("grid.n", e.to_string()))?;
            positive("flow.t_final", flow.t_final)?;
            if flow.snapshot_stride == 0 {
                return Err(invalid("flow.snapshot_stride", "must be at least 1"));
            }
            let f0 = flow.f0.sample(spec);
            if !f0.is_finite() {
                return Err(invalid("flow.f0", "not finite on the grid"));
            }
            let metric = ConformalMetric::new(f0, 0.0).map_err(|e| invalid("flow.f0", e.to_string()))?;
            let limit = cfl_limit(&metric);
            let dt = match flow.dt {
                Some(dt) => {
                    positive("flow.dt", dt)?;
                    if dt > limit {
                        return Err(invalid("flow.dt", format!("{dt} exceeds the CFL limit {limit}")));
                    }
                    dt
                }
                None => limit,
            };
            if checks.entropy.as_ref().is_some_and(|e| e.final_density.is_none()) {
                return Err(invalid("checks.entropy.final_density", "required on grid scenarios"));
            }
            let x0 = match checks.x0 {
                Some([i, j]) => {
                    spec.check_index(i, j).map_err(|e| invalid("checks.x0", e.to_string()))?;
                    (i, j)
                }
                None => (grid.n / 2, grid.n / 2),
            };
            Testbed::Grid { spec, flow, dt, x0 }
        }
        (None, None, Some(sphere)) => {
            let model = SphereModel::new(sphere.n).map_err(|e| invalid("sphere.n", e.to_string()))?;
            positive("sphere.r", sphere.r)?;
            positive("sphere.t_max", sphere.t_max)?;
            if sphere.t_max >= model.blowup_time() {
                return Err(invalid("sphere.t_max", format!("must be below the blow-up time {}", model.blowup_time())));
            }
            if sphere.samples_theta == 0 || sphere.samples_t == 0 {
                return Err(invalid("sphere.samples_theta", "sample counts must be positive"));
            }
            if sphere.gaussian_dimension == 0 {
                return Err(invalid("sphere.gaussian_dimension", "must be positive"));
            }
            Testbed::Sphere(sphere)
        }
        (None, Some(_), _) | (Some(_), None, _) => {
            return Err(invalid("grid", "grid scenarios need both [grid] and [flow]"));
        }
        _ => return Err(invalid("sphere", "give either [grid] + [flow] or [sphere], not both")),
    };
    Ok(Scenario {
        name: file.name,
        source: text.to_string(),
        output_dir: file.output_dir,
        testbed,
        ledger,
        checks,
        barriers,
        refinement: file.refinement,
    })
}
