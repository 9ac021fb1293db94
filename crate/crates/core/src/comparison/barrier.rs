//! Distance barriers `Ψ_m`, `Φ_m` and checks of their differential
//! inequalities.
//!
//! With `ρ = d_t(x, x₀)²` and ball radius `R_m = r/2^{m−1}`:
//! `Ψ_m = α r²/(R_m² − ρ)²`, `Φ_1 = Ψ_1 + 1/t`,
//! `Φ_m = β Ψ_m^m + γ/t^m` for `m ≥ 2`. The required inequalities are
//! `(∂_t − Δ)Ψ_m ≥ −Ψ_m²`, `(∂_t − Δ)Φ_1 ≥ −Φ_1²` and
//! `(∂_t − Δ)Φ_m ≥ −Φ_m²/v^{m−1} + v^{m+1}` with `v = 1/r² + 1/t`.

use std::fmt;

use crate::estimates::ParabolicBall;
use crate::flows::{FlowTrajectory, SphereModel};
use crate::geometry::{flat_laplacian, ScalarField};

use super::constants::{solve_by_bisection, ConstantLedger};
use super::{ComparisonError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    Psi(usize),
    Phi(usize),
}

impl BarrierKind {
    pub fn order(&self) -> usize {
        match *self {
            BarrierKind::Psi(m) | BarrierKind::Phi(m) => m,
        }
    }

    /// Ball radius as a fraction of `r`.
    pub fn radius_fraction(&self) -> f64 {
        0.5f64.powi(self.order() as i32 - 1)
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, BarrierKind::Phi(_))
    }

    fn validate(&self) -> Result<()> {
        if self.order() == 0 {
            return Err(ComparisonError::InvalidArgument("barrier order starts at 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for BarrierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BarrierKind::Psi(m) => write!(f, "psi{m}"),
            BarrierKind::Phi(m) => write!(f, "phi{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r: f64,
}

impl BarrierParams {
    pub fn new(alpha: f64, r: f64) -> Self {
        Self {
            alpha,
            beta: 1.0,
            gamma: 1.0,
            r,
        }
    }

    /// `α_m, β_m, γ_m` of the ledger at radius `r`.
    pub fn from_ledger(ledger: &ConstantLedger, m: usize, r: f64) -> Option<Self> {
        let o = ledger.order(m)?;
        Some(Self {
            alpha: o.alpha,
            beta: o.beta.unwrap_or(1.0),
            gamma: o.gamma.unwrap_or(1.0),
            r,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Barrier value and its partial derivatives in `(ρ, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierJet {
    pub value: f64,
    pub d_rho: f64,
    pub d_rho2: f64,
    pub d_t: f64,
}

/// Value and partials of a barrier at `(ρ, t)`; `None` on and outside the
/// ball or at `t ≤ 0` for time-dependent kinds.
pub fn barrier_jet(kind: BarrierKind, p: &BarrierParams, rho: f64, t: f64) -> Option<BarrierJet> {
    let big_r = p.r * kind.radius_fraction();
    let gap = big_r * big_r - rho;
    if !(gap > 0.0) || (kind.is_time_dependent() && !(t > 0.0)) {
        return None;
    }
    let ar2 = p.alpha * p.r * p.r;
    let psi = ar2 / (gap * gap);
    let psi1 = 2.0 * ar2 / gap.powi(3);
    let psi2 = 6.0 * ar2 / gap.powi(4);
    Some(match kind {
        BarrierKind::Psi(_) => BarrierJet {
            value: psi,
            d_rho: psi1,
            d_rho2: psi2,
            d_t: 0.0,
        },
        BarrierKind::Phi(1) => BarrierJet {
            value: psi + 1.0 / t,
            d_rho: psi1,
            d_rho2: psi2,
            d_t: -1.0 / (t * t),
        },
        BarrierKind::Phi(m) => {
            let mf = m as f64;
            let mi = m as i32;
            BarrierJet {
                value: p.beta * psi.powi(mi) + p.gamma / t.powi(mi),
                d_rho: p.beta * mf * psi.powi(mi - 1) * psi1,
                d_rho2: p.beta * mf * ((mf - 1.0) * psi.powi(mi - 2) * psi1 * psi1 + psi.powi(mi - 1) * psi2),
                d_t: -mf * p.gamma / t.powi(mi + 1),
            }
        }
    })
}

/// Right side of the barrier inequality at barrier value `value`.
pub fn barrier_target(kind: BarrierKind, p: &BarrierParams, value: f64, t: f64) -> f64 {
    match kind {
        BarrierKind::Psi(_) | BarrierKind::Phi(1) => -value * value,
        BarrierKind::Phi(m) => {
            let v = 1.0 / (p.r * p.r) + 1.0 / t;
            -value * value / v.powi(m as i32 - 1) + v.powi(m as i32 + 1)
        }
    }
}

/// Size of the leading terms, used to normalise violations.
fn barrier_scale(kind: BarrierKind, p: &BarrierParams, value: f64, t: f64) -> f64 {
    match kind {
        BarrierKind::Psi(_) | BarrierKind::Phi(1) => value * value,
        BarrierKind::Phi(m) => {
            let v = 1.0 / (p.r * p.r) + 1.0 / t;
            value * value / v.powi(m as i32 - 1)
        }
    }
}

/// Barrier values on a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierField {
    pub kind: BarrierKind,
    pub params: BarrierParams,
    pub t: f64,
    /// `+∞` on and outside the ball.
    pub values: ScalarField,
}

impl BarrierField {
    pub fn is_inside(&self, cell: usize) -> bool {
        self.values.values()[cell].is_finite()
    }
}

pub fn barrier_eval(
    kind: BarrierKind,
    params: &BarrierParams,
    distance: &ScalarField,
    t: f64,
) -> Result<BarrierField> {
    kind.validate()?;
    if kind.is_time_dependent() && !(t > 0.0) {
        return Err(ComparisonError::InvalidArgument(format!("{kind} needs t > 0, got {t}")));
    }
    let values = distance
        .values()
        .iter()
        .map(|&d| barrier_jet(kind, params, d * d, t).map_or(f64::INFINITY, |j| j.value))
        .collect();
    Ok(BarrierField {
        kind,
        params: *params,
        t,
        values: ScalarField::from_raw(*distance.spec(), values),
    })
}

/// Derivatives of `ρ = d²` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoJet {
    pub rho: f64,
    pub rho_t: f64,
    pub lap_rho: f64,
    pub grad_rho_sq: f64,
}

impl RhoJet {
    /// Flat `ℝⁿ`, static metric.
    pub fn flat(n: usize, d: f64) -> Self {
        Self {
            rho: d * d,
            rho_t: 0.0,
            lap_rho: 2.0 * n as f64,
            grad_rho_sq: 4.0 * d * d,
        }
    }

    /// Shrinking sphere at polar angle `θ` from the pole, where
    /// `d = √s θ` with `s = 1 − 2(n−1)t`.
    pub fn sphere(model: &SphereModel, theta: f64, t: f64) -> Result<Self> {
        let s = model.scale(t).map_err(|e| ComparisonError::InvalidArgument(e.to_string()))?;
        let n = model.dimension() as f64;
        let theta_cot = if theta.abs() < 1e-8 {
            1.0 - theta * theta / 3.0
        } else {
            theta / theta.tan()
        };
        Ok(Self {
            rho: s * theta * theta,
            rho_t: -2.0 * (n - 1.0) * theta * theta,
            lap_rho: 2.0 + 2.0 * (n - 1.0) * theta_cot,
            grad_rho_sq: 4.0 * s * theta * theta,
        })
    }
}

/// `(∂_t − Δ)B` evaluated by the chain rule, with its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub value: f64,
}

impl RadialCheck {
    /// `(rhs − lhs)⁺` relative to the dominant quadratic term.
    pub fn relative_violation(&self, kind: BarrierKind, p: &BarrierParams, t: f64) -> f64 {
        (self.rhs - self.lhs).max(0.0) / barrier_scale(kind, p, self.value, t)
    }
}

pub fn radial_check(kind: BarrierKind, p: &BarrierParams, jet: &RhoJet, t: f64) -> Option<RadialCheck> {
    let b = barrier_jet(kind, p, jet.rho, t)?;
    let lhs = b.d_rho * (jet.rho_t - jet.lap_rho) - b.d_rho2 * jet.grad_rho_sq + b.d_t;
    Some(RadialCheck {
        lhs,
        rhs: barrier_target(kind, p, b.value, t),
        value: b.value,
    })
}

/// Outcome of the closed-form check on the shrinking sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereBarrierReport {
    pub kind: BarrierKind,
    pub params: BarrierParams,
    pub samples: usize,
    pub max_relative_violation: f64,
    pub worst: Option<(f64, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Deterministic `(θ, t)` samples strictly inside the barrier's ball:
/// `count_t` times in `(0, t_max]` and `count_theta` angles per time.
pub fn sphere_samples(
    model: &SphereModel,
    kind: BarrierKind,
    r: f64,
    count_theta: usize,
    count_t: usize,
    t_max: f64,
) -> Result<Vec<(f64, f64)>> {
    let radius = r * kind.radius_fraction();
    let mut out = Vec::with_capacity(count_theta * count_t);
    for it in 0..count_t {
        let t = t_max * (it as f64 + 1.0) / count_t as f64;
        let s = model.scale(t).map_err(|e| ComparisonError::InvalidArgument(e.to_string()))?;
        let theta_max = radius / s.sqrt();
        if theta_max >= std::f64::consts::PI {
            return Err(ComparisonError::InvalidArgument(format!(
                "ball of radius {radius} covers the sphere at t = {t}"
            )));
        }
        for ith in 0..count_theta {
            out.push((theta_max * (ith as f64 + 0.5) / count_theta as f64, t));
        }
    }
    Ok(out)
}

pub fn check_sphere_barrier(
    model: &SphereModel,
    kind: BarrierKind,
    params: &BarrierParams,
    samples: &[(f64, f64)],
    tolerance: f64,
) -> Result<SphereBarrierReport> {
    kind.validate()?;
    let mut worst = None;
    let mut max_rel: f64 = 0.0;
    for &(theta, t) in samples {
        let jet = RhoJet::sphere(model, theta, t)?;
        let check = radial_check(kind, params, &jet, t).ok_or_else(|| {
            ComparisonError::InvalidArgument(format!("sample (θ = {theta}, t = {t}) lies outside the ball"))
        })?;
        let rel = check.relative_violation(kind, params, t);
        if rel > max_rel || worst.is_none() {
            max_rel = max_rel.max(rel);
            worst = Some((theta, t));
        }
    }
    Ok(SphereBarrierReport {
        kind,
        params: *params,
        samples: samples.len(),
        max_relative_violation: max_rel,
        worst,
        tolerance,
        pass: max_rel <= tolerance,
    })
}

/// Smallest `α` for which the closed-form sphere check has no violation.
pub fn calibrate_sphere_alpha(
    model: &SphereModel,
    kind: BarrierKind,
    params: &BarrierParams,
    samples: &[(f64, f64)],
) -> Result<f64> {
    let mut failure = None;
    let alpha = solve_by_bisection(|alpha| {
        match check_sphere_barrier(model, kind, &params.with_alpha(alpha), samples, 0.0) {
            Ok(rep) => {
                if rep.pass {
                    1.0
                } else {
                    -1.0
                }
            }
            Err(e) => {
                failure = Some(e);
                -1.0
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    alpha
}

/// Outcome of a barrier check on grid trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub kind: BarrierKind,
    pub params: BarrierParams,
    pub checked_points: usize,
    pub skipped_cut_locus: usize,
    /// Points whose stencil leaves the ball.
    pub skipped_boundary: usize,
    pub max_violation: f64,
    pub max_relative_violation: f64,
    pub argmax: Option<(usize, usize)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// One-sided second differences of `d` along both axes disagree by this
/// much at a cell.
fn kink(d: &ScalarField, cell: usize) -> f64 {
    let spec = d.spec();
    let v = d.values();
    let mut worst: f64 = 0.0;
    for (dx, dy) in [(1, 0), (0, 1)] {
        let at = |k: isize| v[spec.offset(cell, k * dx, k * dy)];
        let fwd = at(2) - 2.0 * at(1) + at(0);
        let bwd = at(0) - 2.0 * at(-1) + at(-2);
        worst = worst.max((fwd - bwd).abs());
    }
    worst
}

/// Checks the barrier inequality on interior slices of a trajectory.
///
/// `∂_t ρ` is a centred difference of `d²` across neighbouring snapshots,
/// the explicit time dependence is differentiated exactly, and `Δ_g B` is
/// the five-point stencil applied to the barrier field. Points whose
/// stencil leaves the ball, and points flagged by the cut-locus detector
/// (one-sided second differences of `d` disagreeing by more than ten times
/// the median), are skipped.
pub fn check_barrier_inequality(
    trajectory: &FlowTrajectory,
    ball: &ParabolicBall,
    kind: BarrierKind,
    params: &BarrierParams,
    tolerance: f64,
) -> Result<BarrierReport> {
    kind.validate()?;
    let slices = ball.num_slices();
    if slices < 3 {
        return Err(ComparisonError::TooFewSnapshots(slices));
    }
    let spec = *ball.spec();
    let radius = params.r * kind.radius_fraction();
    let mut report = BarrierReport {
        kind,
        params: *params,
        checked_points: 0,
        skipped_cut_locus: 0,
        skipped_boundary: 0,
        max_violation: 0.0,
        max_relative_violation: 0.0,
        argmax: None,
        tolerance,
        pass: true,
    };
    for s in 1..slices - 1 {
        let t = ball.times()[s];
        if kind.is_time_dependent() && ball.times()[s - 1] <= 0.0 {
            continue;
        }
        let d = ball.distance(s);
        let field = barrier_eval(kind, params, d, t)?;
        let candidates: Vec<usize> = (0..spec.len())
            .filter(|&c| d.values()[c] < radius)
            .collect();
        let mut kinks: Vec<f64> = candidates.iter().map(|&c| kink(d, c)).collect();
        let threshold = {
            let mut sorted = kinks.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
            10.0 * median.max(1e-12)
        };
        let lap = flat_laplacian(&ScalarField::from_raw(
            spec,
            field.values.values().iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect(),
        ));
        let metric = &trajectory.snapshots[s].metric;
        let (dm, dp) = (ball.distance(s - 1), ball.distance(s + 1));
        let dt2 = ball.times()[s + 1] - ball.times()[s - 1];
        for (idx, &c) in candidates.iter().enumerate() {
            let stencil_inside = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .all(|&(di, dj)| field.is_inside(spec.offset(c, di, dj)));
            if !stencil_inside {
                report.skipped_boundary += 1;
                continue;
            }
            if kinks[idx] > threshold {
                report.skipped_cut_locus += 1;
                continue;
            }
            let rho = d.values()[c].powi(2);
            let rho_t = (dp.values()[c].powi(2) - dm.values()[c].powi(2)) / dt2;
            let Some(jet) = barrier_jet(kind, params, rho, t) else {
                continue;
            };
            let lhs = jet.d_rho * rho_t + jet.d_t - (-2.0 * metric.exponent().values()[c]).exp() * lap.values()[c];
            let rhs = barrier_target(kind, params, jet.value, t);
            let violation = (rhs - lhs).max(0.0);
            let rel = violation / barrier_scale(kind, params, jet.value, t);
            report.checked_points += 1;
            if rel > report.max_relative_violation {
                report.max_relative_violation = rel;
                report.max_violation = violation;
                report.argmax = Some((s, c));
            }
        }
        kinks.clear();
    }
    report.pass = report.max_relative_violation <= tolerance;
    Ok(report)
}

/// Smallest `α` for which the grid check passes at `tolerance`.
pub fn calibrate_grid_alpha(
    trajectory: &FlowTrajectory,
    ball: &ParabolicBall,
    kind: BarrierKind,
    params: &BarrierParams,
    tolerance: f64,
) -> Result<f64> {
    let mut failure = None;
    let alpha = solve_by_bisection(|alpha| {
        match check_barrier_inequality(trajectory, ball, kind, &params.with_alpha(alpha), tolerance) {
            Ok(rep) if rep.pass => 1.0,
            Ok(_) => -1.0,
            Err(e) => {
                failure = Some(e);
                -1.0
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    alpha
}
