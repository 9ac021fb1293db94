//! Time stepping for two-dimensional Ricci flow and the heat equations
//! coupled to it.
//!
//! In conformal form Ricci flow `∂_t g = −2 Ric` reads `∂_t f = e^{-2f} Δ₀f`.
//! All integrators are classical four-stage Runge–Kutta under the explicit
//! step restriction `dt ≤ 0.2 h² min e^{2f}`.

mod io;
mod sphere;

pub use io::{read_trajectory, write_trajectory, TRAJECTORY_MAGIC};
pub use sphere::{sphere_exact, unit_sphere_volume, SphereModel, SphereState};

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::{flat_laplacian, ConformalMetric, GeometryError, GridSpec, ScalarField};

/// Explicit step restriction factor.
pub const CFL_FACTOR: f64 = 0.2;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("time step {dt} rejected: explicit stability limit is {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("non-finite values at t = {t}; run aborted")]
    Blowup {
        t: f64,
        last_good: Box<FlowTrajectory>,
    },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("t = {t} is outside the sphere model's lifetime [0, {blowup})")]
    Domain { t: f64, blowup: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// Largest admissible explicit step for a metric.
pub fn cfl_limit(metric: &ConformalMetric) -> f64 {
    CFL_FACTOR * metric.spec().h_min().powi(2) * metric.min_conformal_factor()
}

fn check_cfl(metric: &ConformalMetric, dt: f64) -> Result<()> {
    let limit = cfl_limit(metric);
    if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
        return Err(FlowError::Cfl { dt, limit });
    }
    Ok(())
}

fn rk4<F>(y: &[f64], dt: f64, rhs: F) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let k1 = rhs(0.0, y);
    let k2 = rhs(0.5, &axpy(0.5 * dt, &k1));
    let k3 = rhs(0.5, &axpy(0.5 * dt, &k2));
    let k4 = rhs(1.0, &axpy(dt, &k3));
    y.iter()
        .enumerate()
        .map(|(i, y)| y + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn laplacian_raw(spec: GridSpec, values: &[f64]) -> Vec<f64> {
    flat_laplacian(&ScalarField::from_raw(spec, values.to_vec())).into_values()
}

fn ricci_rhs(spec: GridSpec, f: &[f64]) -> Vec<f64> {
    let lap = laplacian_raw(spec, f);
    lap.iter().zip(f).map(|(l, f)| (-2.0 * f).exp() * l).collect()
}

/// One RK4 step of `∂_t f = e^{-2f} Δ₀f`.
pub fn ricci_step(metric: &ConformalMetric, dt: f64) -> Result<ConformalMetric> {
    check_cfl(metric, dt)?;
    let spec = *metric.spec();
    let next = rk4(metric.exponent().values(), dt, |_, f| ricci_rhs(spec, f));
    Ok(ConformalMetric::new(
        ScalarField::from_values(spec, next)?,
        metric.time() + dt,
    )?)
}

/// One RK4 step of `∂_t u = Δ_g u` with the metric held fixed.
pub fn heat_step(metric: &ConformalMetric, u: &ScalarField, dt: f64) -> Result<ScalarField> {
    check_cfl(metric, dt)?;
    if metric.spec() != u.spec() {
        return Err(GeometryError::GridMismatch.into());
    }
    let spec = *metric.spec();
    let inv: Vec<f64> = metric
        .exponent()
        .values()
        .iter()
        .map(|f| (-2.0 * f).exp())
        .collect();
    let next = rk4(u.values(), dt, |_, u| {
        let lap = laplacian_raw(spec, u);
        lap.iter().zip(&inv).map(|(l, w)| l * w).collect()
    });
    Ok(ScalarField::from_values(spec, next)?)
}

/// Advances `(f, u)` together; each `u` stage sees the matching metric stage.
fn coupled_step(spec: GridSpec, f: &[f64], u: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = spec.len();
    let mut y = Vec::with_capacity(2 * n);
    y.extend_from_slice(f);
    y.extend_from_slice(u);
    let next = rk4(&y, dt, |_, y| {
        let (f, u) = y.split_at(n);
        let lf = laplacian_raw(spec, f);
        let lu = laplacian_raw(spec, u);
        let mut out = Vec::with_capacity(2 * n);
        out.extend(lf.iter().zip(f).map(|(l, f)| (-2.0 * f).exp() * l));
        out.extend(lu.iter().zip(f).map(|(l, f)| (-2.0 * f).exp() * l));
        out
    });
    let (f, u) = next.split_at(n);
    (f.to_vec(), u.to_vec())
}

/// Inputs of a coupled Ricci–heat run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub f0: ScalarField,
    pub u0: ScalarField,
    /// Requested step; the run uses the largest step `≤ dt` that lands on
    /// `t_final` with a whole number of snapshot intervals.
    pub dt: f64,
    pub t_final: f64,
    /// Steps between stored snapshots.
    pub snapshot_stride: usize,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(name: impl Into<String>, f0: ScalarField, u0: ScalarField, dt: f64, t_final: f64) -> Self {
        Self {
            name: name.into(),
            f0,
            u0,
            dt,
            t_final,
            snapshot_stride: 1,
            output_dir: None,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        self.f0.spec()
    }

    pub fn validate(&self) -> Result<()> {
        if self.f0.spec() != self.u0.spec() {
            return Err(GeometryError::GridMismatch.into());
        }
        if !self.f0.is_finite() || !self.u0.is_finite() {
            return Err(FlowError::InvalidConfig("initial data must be finite".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(FlowError::InvalidConfig(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(FlowError::InvalidConfig("snapshot stride must be at least 1".into()));
        }
        let metric = ConformalMetric::new(self.f0.clone(), 0.0)?;
        check_cfl(&metric, self.dt)
    }

    /// Step count and step size actually used.
    pub fn schedule(&self) -> (usize, f64) {
        let stride = self.snapshot_stride.max(1);
        let intervals = (self.t_final / (self.dt * stride as f64) - 1e-9).ceil().max(1.0) as usize;
        let steps = intervals * stride;
        (steps, self.t_final / steps as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub metric: ConformalMetric,
    pub u: ScalarField,
}

/// Record of the discrete maximum principle along a heat run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleLog {
    pub initial_sup: f64,
    pub trajectory_sup: f64,
    pub tolerance: f64,
}

impl MaxPrincipleLog {
    pub fn holds(&self) -> bool {
        self.trajectory_sup <= self.initial_sup + self.tolerance
    }
}

/// Which equation the `u` fields of a trajectory solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solution {
    Heat,
    Conjugate,
}

/// Time-ordered snapshots of a coupled run.
#[derive(Clone, PartialEq)]
pub struct FlowTrajectory {
    pub name: String,
    /// Integrator step.
    pub dt: f64,
    pub stride: usize,
    pub solution: Solution,
    pub snapshots: Vec<Snapshot>,
    pub max_principle: Option<MaxPrincipleLog>,
}

impl fmt::Debug for FlowTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowTrajectory")
            .field("name", &self.name)
            .field("dt", &self.dt)
            .field("stride", &self.stride)
            .field("solution", &self.solution)
            .field("snapshots", &self.snapshots.len())
            .field("t_final", &self.t_final())
            .finish()
    }
}

impl FlowTrajectory {
    pub fn spec(&self) -> &GridSpec {
        self.snapshots[0].metric.spec()
    }

    pub fn t_final(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.t)
    }

    /// Time between stored snapshots.
    pub fn snapshot_interval(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Metric at an arbitrary time, linear in `f` between snapshots.
    pub fn metric_at(&self, t: f64) -> ConformalMetric {
        let n = self.snapshots.len();
        let dt = self.snapshot_interval();
        let pos = ((t - self.snapshots[0].t) / dt).clamp(0.0, (n - 1) as f64);
        let k = (pos.floor() as usize).min(n.saturating_sub(2));
        if n == 1 {
            return self.snapshots[0].metric.clone().with_time(t);
        }
        let w = pos - k as f64;
        let a = self.snapshots[k].metric.exponent();
        let b = self.snapshots[k + 1].metric.exponent();
        let values = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        ConformalMetric::new(ScalarField::from_raw(*a.spec(), values), t)
            .expect("interpolated exponent is finite")
    }
}

/// Runs Ricci flow and the coupled heat equation on `[0, t_final]`.
pub fn run_coupled_flow(config: &RunConfig) -> Result<FlowTrajectory> {
    config.validate()?;
    let spec = *config.spec();
    let (steps, dt) = config.schedule();
    let stride = config.snapshot_stride;

    let mut f = config.f0.values().to_vec();
    let mut u = config.u0.values().to_vec();
    let initial_sup = config.u0.sup_norm();
    let mut traj = FlowTrajectory {
        name: config.name.clone(),
        dt,
        stride,
        solution: Solution::Heat,
        snapshots: vec![Snapshot {
            t: 0.0,
            metric: ConformalMetric::new(config.f0.clone(), 0.0)?,
            u: config.u0.clone(),
        }],
        max_principle: None,
    };
    let mut sup_u = initial_sup;
    let mut sup_lap: f64 = 0.0;

    for step in 1..=steps {
        let t = step as f64 * dt;
        let current = ConformalMetric::new(ScalarField::from_raw(spec, f.clone()), t - dt)?;
        check_cfl(&current, dt)?;
        let (nf, nu) = coupled_step(spec, &f, &u, dt);
        if nf.iter().chain(&nu).any(|v| !v.is_finite()) {
            return Err(FlowError::Blowup {
                t,
                last_good: Box::new(traj),
            });
        }
        if step == 1 {
            let lap = laplacian_raw(spec, &u);
            sup_lap = lap
                .iter()
                .zip(&f)
                .fold(0.0, |m, (l, f)| m.max(((-2.0 * f).exp() * l).abs()));
        }
        f = nf;
        u = nu;
        sup_u = u.iter().fold(sup_u, |m, v| m.max(v.abs()));
        if step % stride == 0 {
            traj.snapshots.push(Snapshot {
                t,
                metric: ConformalMetric::new(ScalarField::from_raw(spec, f.clone()), t)?,
                u: ScalarField::from_raw(spec, u.clone()),
            });
        }
    }

    let log = MaxPrincipleLog {
        initial_sup,
        trajectory_sup: sup_u,
        tolerance: 10.0 * dt * sup_lap,
    };
    if !log.holds() {
        log::warn!(
            "{}: discrete maximum principle exceeded ({} > {} + {})",
            config.name,
            log.trajectory_sup,
            log.initial_sup,
            log.tolerance
        );
    }
    traj.max_principle = Some(log);
    Ok(traj)
}

/// Solves `∂_t u + Δ_g u − R u = 0` backward from `u(T) = u_final` over the
/// stored metrics of `trajectory`.
///
/// Integrates `∂_s u = Δ_{g(T−s)} u − R(T−s) u` forward in `s = T − t` with
/// the trajectory's step; RK stage metrics are interpolated linearly in `f`.
pub fn conjugate_heat_solve(trajectory: &FlowTrajectory, u_final: &ScalarField) -> Result<FlowTrajectory> {
    if trajectory.snapshots.is_empty() {
        return Err(FlowError::InvalidConfig("empty trajectory".into()));
    }
    let spec = *trajectory.spec();
    if u_final.spec() != &spec {
        return Err(GeometryError::GridMismatch.into());
    }
    if !u_final.is_finite() {
        return Err(FlowError::InvalidConfig("final data must be finite".into()));
    }
    let dt = trajectory.dt;
    for snap in &trajectory.snapshots {
        check_cfl(&snap.metric, dt)?;
    }

    struct Coefficients {
        inv_factor: Vec<f64>,
        curvature: Vec<f64>,
    }
    let coefficients = |t: f64| {
        let metric = trajectory.metric_at(t);
        let r = crate::geometry::scalar_curvature(&metric).into_values();
        Coefficients {
            inv_factor: metric
                .exponent()
                .values()
                .iter()
                .map(|f| (-2.0 * f).exp())
                .collect(),
            curvature: r,
        }
    };

    let n = trajectory.snapshots.len();
    let mut out = vec![u_final.clone(); n];
    let mut u = u_final.values().to_vec();
    for k in (1..n).rev() {
        let t_hi = trajectory.snapshots[k].t;
        for sub in 0..trajectory.stride {
            let t0 = t_hi - sub as f64 * dt;
            let stages = [coefficients(t0), coefficients(t0 - 0.5 * dt), coefficients(t0 - dt)];
            u = rk4(&u, dt, |frac, u| {
                let c = if frac == 0.0 {
                    &stages[0]
                } else if frac < 1.0 {
                    &stages[1]
                } else {
                    &stages[2]
                };
                let lap = laplacian_raw(spec, u);
                (0..spec.len())
                    .map(|i| c.inv_factor[i] * lap[i] - c.curvature[i] * u[i])
                    .collect()
            });
        }
        if u.iter().any(|v| !v.is_finite()) {
            let t = trajectory.snapshots[k - 1].t;
            let mut partial = trajectory.clone();
            partial.snapshots = partial.snapshots.split_off(k);
            for (snap, field) in partial.snapshots.iter_mut().zip(&out[k..]) {
                snap.u = field.clone();
            }
            partial.solution = Solution::Conjugate;
            return Err(FlowError::Blowup {
                t,
                last_good: Box::new(partial),
            });
        }
        out[k - 1] = ScalarField::from_raw(spec, u.clone());
    }

    let mut result = trajectory.clone();
    for (snap, field) in result.snapshots.iter_mut().zip(out) {
        snap.u = field;
    }
    result.solution = Solution::Conjugate;
    result.max_principle = None;
    Ok(result)
}
