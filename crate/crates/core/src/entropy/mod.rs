//! W-entropy, Perelman's `P(u)` and the conjugate-heat identities
//! `H*P(u) = 2τ|Ric − Hess ln u − g/(2τ)|²u` and
//! `dW/dt = 2τ∫|Ric − Hess ln u − g/(2τ)|²u dg`.
//!
//! Grid evaluations are 2D (`n = 2`); the sphere closed forms take any
//! `n ≥ 2`. Time derivatives of grid quantities are centred differences
//! across snapshots, with the explicit `τ` dependence differentiated exactly.

mod gaussian;
mod sphere;

pub use gaussian::{gaussian_p, gaussian_p_scan, GaussianScan};
pub use sphere::{sphere_conjugate_sides, sphere_entropy_rate, sphere_w_entropy};

use std::f64::consts::PI;

use thiserror::Error;

use crate::flows::{FlowError, FlowTrajectory, Snapshot, Solution};
use crate::geometry::{CovariantCalculus, ConformalMetric, GeometryError, ScalarField, TensorField};

/// Allowed deviation of `∫v² dg` from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Conjugate solutions below this are rejected rather than regularised.
pub const POSITIVITY_FLOOR: f64 = 1e-30;

const GRID_DIMENSION: f64 = 2.0;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("∫v² dg = {mass}, expected 1 within {NORMALIZATION_TOLERANCE}")]
    Normalization { mass: f64 },
    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("u must be positive, minimum is {min}")]
    NonPositive { min: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

pub type Result<T> = std::result::Result<T, EntropyError>;

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(EntropyError::NonPositiveTau(tau))
    }
}

fn check_positive(u: &ScalarField) -> Result<()> {
    let min = u.min();
    if min < POSITIVITY_FLOOR || !u.is_finite() {
        Err(EntropyError::NonPositive { min })
    } else {
        Ok(())
    }
}

/// `x ln x` with `0 ln 0 = 0`.
fn x_ln_x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `|∇w|²_g` for a scalar field.
fn grad_sq(calc: &CovariantCalculus, w: &ScalarField) -> Result<ScalarField> {
    Ok(calc.norm(&calc.gradient(w)?)?.map(|v| v * v))
}

/// `W(g, v, τ) = ∫[τ(4|∇v|² + Rv²) − v² ln v² − (n/2) ln(4πτ) v² − n v²] dg`.
pub fn w_entropy(metric: &ConformalMetric, v: &ScalarField, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    metric.check_aligned(v.spec())?;
    let v2 = v.map(|x| x * x);
    let mass = metric.integrate(&v2);
    if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(EntropyError::Normalization { mass });
    }
    let calc = CovariantCalculus::new(metric);
    let grad = grad_sq(&calc, v)?;
    let r = calc.scalar_curvature();
    let log_term = 0.5 * GRID_DIMENSION * (4.0 * PI * tau).ln();
    let integrand: Vec<f64> = (0..v.values().len())
        .map(|c| {
            let q = v2.values()[c];
            tau * (4.0 * grad.values()[c] + r.values()[c] * q) - x_ln_x(q) - log_term * q - GRID_DIMENSION * q
        })
        .collect();
    Ok(metric.integrate(&ScalarField::from_raw(*v.spec(), integrand)))
}

/// Pointwise `P` from the ingredients at one point.
pub fn perelman_p_pointwise(u: f64, lap_u: f64, grad_u_sq: f64, r: f64, tau: f64, n: f64) -> f64 {
    tau * (-2.0 * lap_u + grad_u_sq / u + r * u) - u * u.ln() - 0.5 * n * (4.0 * PI * tau).ln() * u - n * u
}

/// `P(u) = τ(−2Δu + |∇u|²/u + Ru) − u ln u − (n/2) ln(4πτ) u − n u`.
pub fn perelman_p(metric: &ConformalMetric, u: &ScalarField, tau: f64) -> Result<ScalarField> {
    check_tau(tau)?;
    metric.check_aligned(u.spec())?;
    check_positive(u)?;
    let calc = CovariantCalculus::new(metric);
    let lap = calc.laplacian(u)?;
    let grad = grad_sq(&calc, u)?;
    let r = calc.scalar_curvature();
    let values = (0..u.values().len())
        .map(|c| {
            perelman_p_pointwise(
                u.values()[c],
                lap.values()[c],
                grad.values()[c],
                r.values()[c],
                tau,
                GRID_DIMENSION,
            )
        })
        .collect();
    Ok(ScalarField::from_raw(*u.spec(), values))
}

/// `2τ|Ric − Hess ln u − g/(2τ)|²u`, pointwise.
pub fn soliton_defect(metric: &ConformalMetric, u: &ScalarField, tau: f64) -> Result<ScalarField> {
    check_tau(tau)?;
    metric.check_aligned(u.spec())?;
    check_positive(u)?;
    let calc = CovariantCalculus::new(metric);
    let w = u.map(f64::ln);
    let hess = calc.derivatives(&w, 2)?.pop().expect("two derivatives");
    let r = calc.scalar_curvature();
    let spec = *u.spec();
    let mut comps = Vec::with_capacity(4 * spec.len());
    for c in 0..spec.len() {
        // Ric = (R/2) g in two dimensions
        let diag = (0.5 * r.values()[c] - 0.5 / tau) * metric.conformal_factor(c);
        let h = hess.cell(c);
        comps.extend_from_slice(&[diag - h[0], -h[1], -h[2], diag - h[3]]);
    }
    let t = TensorField::from_components(spec, 2, comps)?;
    let norm = calc.norm(&t)?;
    Ok(norm.zip_map(u, |n, u| 2.0 * tau * n * n * u)?)
}

fn require_conjugate(trajectory: &FlowTrajectory) -> Result<()> {
    if trajectory.solution != Solution::Conjugate {
        return Err(EntropyError::InvalidArgument("trajectory does not carry a conjugate solution".into()));
    }
    if trajectory.snapshots.len() < 3 {
        return Err(EntropyError::InvalidArgument(format!(
            "need at least 3 snapshots, got {}",
            trajectory.snapshots.len()
        )));
    }
    Ok(())
}

/// Residual of `H*P(u) = 2τ|Ric − Hess ln u − g/(2τ)|²u` on one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateRecord {
    pub sup_residual: f64,
    /// Largest right side seen, for scale.
    pub sup_rhs: f64,
    pub slices_checked: usize,
    pub tau_min: f64,
    pub h: f64,
    pub snapshot_dt: f64,
}

/// Pieces of `P` that carry no explicit `τ`: `A = −2Δu + |∇u|²/u + Ru`,
/// `u ln u` and `u`.
fn p_parts(snap: &Snapshot) -> Result<(ScalarField, ScalarField)> {
    check_positive(&snap.u)?;
    let calc = CovariantCalculus::new(&snap.metric);
    let lap = calc.laplacian(&snap.u)?;
    let grad = grad_sq(&calc, &snap.u)?;
    let r = calc.scalar_curvature();
    let u = snap.u.values();
    let a = (0..u.len())
        .map(|c| -2.0 * lap.values()[c] + grad.values()[c] / u[c] + r.values()[c] * u[c])
        .collect();
    let spec = *snap.u.spec();
    Ok((ScalarField::from_raw(spec, a), snap.u.map(x_ln_x)))
}

/// Checks `H*P(u) = RHS` with `H* = ∂_t + Δ − R` and `τ = T − t`, on
/// interior snapshots with `τ ≥ tau_min`.
///
/// `∂_t P = −A + τ ∂_t A − ∂_t(u ln u) − (n/2)(ln(4πτ) ∂_t u − u/τ) − n ∂_t u`
/// with centred differences for `∂_t A`, `∂_t(u ln u)` and `∂_t u`.
pub fn conjugate_identity_residual(trajectory: &FlowTrajectory, t_final: f64, tau_min: f64) -> Result<ConjugateRecord> {
    require_conjugate(trajectory)?;
    let snaps = &trajectory.snapshots;
    let parts: Vec<(ScalarField, ScalarField)> = snaps.iter().map(p_parts).collect::<Result<_>>()?;
    let n = GRID_DIMENSION;
    let mut record = ConjugateRecord {
        sup_residual: 0.0,
        sup_rhs: 0.0,
        slices_checked: 0,
        tau_min,
        h: trajectory.spec().h_min(),
        snapshot_dt: trajectory.snapshot_interval(),
    };
    for s in 1..snaps.len() - 1 {
        let tau = t_final - snaps[s].t;
        if tau < tau_min || tau <= 0.0 {
            continue;
        }
        let metric = &snaps[s].metric;
        let calc = CovariantCalculus::new(metric);
        let p = perelman_p(metric, &snaps[s].u, tau)?;
        let lap_p = calc.laplacian(&p)?;
        let r = calc.scalar_curvature();
        let rhs = soliton_defect(metric, &snaps[s].u, tau)?;
        let dt2 = snaps[s + 1].t - snaps[s - 1].t;
        let log_term = (4.0 * PI * tau).ln();
        for c in 0..p.values().len() {
            let d = |f: &dyn Fn(usize) -> f64| (f(s + 1) - f(s - 1)) / dt2;
            let a_t = d(&|k| parts[k].0.values()[c]);
            let ulnu_t = d(&|k| parts[k].1.values()[c]);
            let u_t = d(&|k| snaps[k].u.values()[c]);
            let u = snaps[s].u.values()[c];
            let p_t = -parts[s].0.values()[c] + tau * a_t - ulnu_t - 0.5 * n * (log_term * u_t - u / tau) - n * u_t;
            let lhs = p_t + lap_p.values()[c] - r.values()[c] * p.values()[c];
            record.sup_residual = record.sup_residual.max((lhs - rhs.values()[c]).abs());
            record.sup_rhs = record.sup_rhs.max(rhs.values()[c]);
        }
        record.slices_checked += 1;
    }
    Ok(record)
}

/// One snapshot of the entropy monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRecord {
    pub t: f64,
    pub tau: f64,
    pub w: f64,
    pub dw_dt_measured: f64,
    /// `2τ∫|Ric − Hess ln u − g/(2τ)|²u dg`
    pub rhs_integral: f64,
    /// `∫P(u) dg`
    pub p_integral: f64,
}

impl EntropyRecord {
    pub fn defect(&self) -> f64 {
        self.dw_dt_measured - self.rhs_integral
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub records: Vec<EntropyRecord>,
    pub max_abs_defect: f64,
    pub min_rhs: f64,
    /// `W` and `∫P dg` never drop by more than the tolerance between
    /// consecutive records.
    pub w_nondecreasing: bool,
    pub p_integral_nondecreasing: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// Integrals entering `W` with no explicit `τ`:
/// `E = ∫(4|∇v|² + Rv²)`, `N = ∫v² ln v²` and `M = ∫v²`.
fn w_parts(snap: &Snapshot) -> Result<(f64, f64, f64)> {
    check_positive(&snap.u)?;
    let metric = &snap.metric;
    let v = snap.u.map(f64::sqrt);
    let calc = CovariantCalculus::new(metric);
    let grad = grad_sq(&calc, &v)?;
    let r = calc.scalar_curvature();
    let spec = *v.spec();
    let e = (0..spec.len())
        .map(|c| 4.0 * grad.values()[c] + r.values()[c] * snap.u.values()[c])
        .collect();
    Ok((
        metric.integrate(&ScalarField::from_raw(spec, e)),
        metric.integrate(&snap.u.map(x_ln_x)),
        metric.integrate(&snap.u),
    ))
}

/// Per-snapshot `W(g, √u, T − t)` and the right side of its derivative
/// identity, for interior snapshots with `τ ≥ tau_min`. `dW/dt` is
/// `−E + τ E' − N' − (n/2)(ln(4πτ) M' − M/τ) − n M'` with centred
/// differences of the integrals `E, N, M`.
pub fn entropy_monotonicity_check(
    trajectory: &FlowTrajectory,
    t_final: f64,
    tau_min: f64,
    tolerance: f64,
) -> Result<MonotonicityReport> {
    require_conjugate(trajectory)?;
    let snaps = &trajectory.snapshots;
    let parts: Vec<(f64, f64, f64)> = snaps.iter().map(w_parts).collect::<Result<_>>()?;
    let n = GRID_DIMENSION;
    let mut records = Vec::new();
    for s in 1..snaps.len() - 1 {
        let tau = t_final - snaps[s].t;
        if tau < tau_min || tau <= 0.0 {
            continue;
        }
        let snap = &snaps[s];
        let w = w_entropy(&snap.metric, &snap.u.map(f64::sqrt), tau)?;
        let dt2 = snaps[s + 1].t - snaps[s - 1].t;
        let (e, _, m) = parts[s];
        let e_t = (parts[s + 1].0 - parts[s - 1].0) / dt2;
        let n_t = (parts[s + 1].1 - parts[s - 1].1) / dt2;
        let m_t = (parts[s + 1].2 - parts[s - 1].2) / dt2;
        let dw_dt = -e + tau * e_t - n_t - 0.5 * n * ((4.0 * PI * tau).ln() * m_t - m / tau) - n * m_t;
        let rhs = snap.metric.integrate(&soliton_defect(&snap.metric, &snap.u, tau)?);
        let p_integral = snap.metric.integrate(&perelman_p(&snap.metric, &snap.u, tau)?);
        records.push(EntropyRecord {
            t: snap.t,
            tau,
            w,
            dw_dt_measured: dw_dt,
            rhs_integral: rhs,
            p_integral,
        });
    }
    let max_abs_defect = records.iter().fold(0.0f64, |m, r| m.max(r.defect().abs()));
    let min_rhs = records.iter().fold(f64::INFINITY, |m, r| m.min(r.rhs_integral));
    let w_nondecreasing = records.windows(2).all(|p| p[1].w >= p[0].w - tolerance);
    let p_integral_nondecreasing = records.windows(2).all(|p| p[1].p_integral >= p[0].p_integral - tolerance);
    let pass = !records.is_empty()
        && max_abs_defect <= tolerance
        && min_rhs >= 0.0
        && w_nondecreasing
        && p_integral_nondecreasing;
    Ok(MonotonicityReport {
        records,
        max_abs_defect,
        min_rhs,
        w_nondecreasing,
        p_integral_nondecreasing,
        tolerance,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{cfl_limit, conjugate_heat_solve, run_coupled_flow, RunConfig};
    use crate::geometry::GridSpec;

    fn flat(n: usize) -> ConformalMetric {
        ConformalMetric::flat(GridSpec::square_2pi(n).unwrap())
    }

    #[test]
    fn flat_uniform_entropy() {
        let m = flat(16);
        let area = m.total_area();
        let v = ScalarField::constant(*m.spec(), 1.0 / area.sqrt());
        let tau = 0.7;
        let w = w_entropy(&m, &v, tau).unwrap();
        let expected = area.ln() - (4.0 * PI * tau).ln() - 2.0;
        assert!((w - expected).abs() < 1e-12, "{w} {expected}");
    }

    #[test]
    fn entropy_errors() {
        let m = flat(16);
        let v = ScalarField::constant(*m.spec(), (2.0 / m.total_area()).sqrt());
        assert!(matches!(w_entropy(&m, &v, 1.0), Err(EntropyError::Normalization { .. })));
        let v = ScalarField::constant(*m.spec(), 1.0 / m.total_area().sqrt());
        assert!(matches!(w_entropy(&m, &v, 0.0), Err(EntropyError::NonPositiveTau(_))));
        let mut u = ScalarField::constant(*m.spec(), 1.0);
        u.values_mut()[3] = 0.0;
        assert!(matches!(perelman_p(&m, &u, 1.0), Err(EntropyError::NonPositive { .. })));
    }

    #[test]
    fn zero_density_uses_zero_log_convention() {
        assert_eq!(x_ln_x(0.0), 0.0);
        let m = flat(16);
        let spec = *m.spec();
        let mut v = ScalarField::zeros(spec);
        let half = spec.len() / 2;
        let c = (1.0 / (m.area_element(0) * half as f64)).sqrt();
        for x in &mut v.values_mut()[..half] {
            *x = c;
        }
        assert!(w_entropy(&m, &v, 1.0).unwrap().is_finite());
    }

    #[test]
    fn constant_u_flat_p() {
        let m = flat(16);
        let (c, tau) = (0.3f64, 0.5f64);
        let p = perelman_p(&m, &ScalarField::constant(*m.spec(), c), tau).unwrap();
        let expected = -c * c.ln() - (4.0 * PI * tau).ln() * c - 2.0 * c;
        assert!(p.values().iter().all(|v| (v - expected).abs() < 1e-14));
        // both sides of the conjugate identity are n c / (2τ) = c/τ
        let rhs = soliton_defect(&m, &ScalarField::constant(*m.spec(), c), tau).unwrap();
        assert!(rhs.values().iter().all(|v| (v - c / tau).abs() < 1e-14));
    }

    #[test]
    fn flat_constant_conjugate_residual() {
        let spec = GridSpec::square_2pi(16).unwrap();
        let dt = cfl_limit(&ConformalMetric::flat(spec));
        let cfg = RunConfig::new("flat", ScalarField::zeros(spec), ScalarField::zeros(spec), dt, 0.5);
        let forward = run_coupled_flow(&cfg).unwrap();
        let c = 0.25;
        let conj = conjugate_heat_solve(&forward, &ScalarField::constant(spec, c)).unwrap();
        let t_final = forward.t_final();
        let rec = conjugate_identity_residual(&conj, t_final, 0.0).unwrap();
        assert!(rec.sup_residual < 1e-12, "{rec:?}");
        assert!(conjugate_identity_residual(&forward, t_final, 0.0).is_err());
    }

    #[test]
    fn constant_u_entropy_rate() {
        // W = −ln(4πτ) + ln V − 2 for the uniform density, so
        // dW/dt = 1/τ, and the right side 2τ·(n/(4τ²))·∫u = 1/τ.
        let spec = GridSpec::square_2pi(16).unwrap();
        let dt = cfl_limit(&ConformalMetric::flat(spec));
        let forward = run_coupled_flow(&RunConfig::new("flat", ScalarField::zeros(spec), ScalarField::zeros(spec), dt, 0.5)).unwrap();
        let area = (2.0 * PI).powi(2);
        let conj = conjugate_heat_solve(&forward, &ScalarField::constant(spec, 1.0 / area)).unwrap();
        let rep = entropy_monotonicity_check(&conj, forward.t_final(), 0.0, 1e-10).unwrap();
        assert!(rep.pass, "{rep:?}");
        for r in &rep.records {
            assert!((r.dw_dt_measured - 1.0 / r.tau).abs() < 1e-10);
            assert!((r.w - (area.ln() - (4.0 * PI * r.tau).ln() - 2.0)).abs() < 1e-12);
        }
    }
}
