//! Checkers for local derivative bounds of heat solutions along Ricci flow.
//!
//! Every checker scans a trajectory, records the supremum of
//! `measured / (a · rate)` over its region, and compares it against a
//! supplied constant. Ratios are constant-free: a report passes when
//! `sup_ratio ≤ constant_used`. Hypotheses are re-evaluated from the raw
//! fields and reported as flags; a flagged report still carries a ratio.

mod ball;

pub use ball::{parabolic_ball, ParabolicBall, SphereBall};

use std::fmt;

use thiserror::Error;

use crate::flows::FlowTrajectory;
use crate::geometry::{CovariantCalculus, GeometryError, GridSpec, ScalarField, DEFAULT_MAX_RANK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, EstimateError>;

/// Relative slack when testing hypotheses such as `|u| ≤ a`.
const HYPOTHESIS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateId {
    Gradient,
    Hessian,
    Higher(usize),
    Shi(usize),
    Zhang,
    Laplacian,
}

impl EstimateId {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateId::Gradient => "gradient",
            EstimateId::Hessian => "hessian",
            EstimateId::Higher(_) => "higher",
            EstimateId::Shi(_) => "shi",
            EstimateId::Zhang => "zhang",
            EstimateId::Laplacian => "laplacian",
        }
    }

    /// Derivative order of the bounded quantity.
    pub fn order(&self) -> usize {
        match *self {
            EstimateId::Gradient | EstimateId::Zhang => 1,
            EstimateId::Hessian | EstimateId::Laplacian => 2,
            EstimateId::Higher(k) | EstimateId::Shi(k) => k,
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which rate the derivative checkers divide by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckMode {
    /// `1/r^k + 1/t^{k/2}`, scanned over `t > 0`.
    #[default]
    Standard,
    /// `1/r^k`, scanned over all slices including `t = 0`; requires
    /// `|∇^i u| ≤ a/r^i` for `i ≤ k` on the initial ball.
    TimeUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReportFlags {
    /// Ball reaches around the torus.
    pub wraps: bool,
    /// `|u| ≤ a` failed somewhere on the hypothesis region.
    pub bound_violated: bool,
    /// Curvature hypothesis failed on `PB_r`.
    pub curvature_violated: bool,
    /// Time-uniform initial bounds failed.
    pub initial_bound_violated: bool,
    /// `u ≤ 0` somewhere.
    pub nonpositive: bool,
    /// Constant ledger failed certification.
    pub ledger_violation: bool,
}

impl ReportFlags {
    pub fn labels(&self) -> Vec<&'static str> {
        [
            (self.wraps, "wraps"),
            (self.bound_violated, "bound"),
            (self.curvature_violated, "curvature"),
            (self.initial_bound_violated, "initial-bound"),
            (self.nonpositive, "nonpositive"),
            (self.ledger_violation, "ledger"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect()
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.labels().is_empty()
    }
}

impl fmt::Display for ReportFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels = self.labels();
        if labels.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&labels.join(";"))
        }
    }
}

/// Where a supremum was attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Argmax {
    pub slice: usize,
    pub t: f64,
    pub cell: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub id: EstimateId,
    pub mode: CheckMode,
    pub r: Option<f64>,
    pub a: Option<f64>,
    pub sup_ratio: f64,
    pub constant_used: f64,
    pub pass: bool,
    /// Earliest time included in the scan.
    pub t_min: f64,
    pub argmax: Option<Argmax>,
    pub flags: ReportFlags,
}

impl EstimateReport {
    pub fn k(&self) -> usize {
        self.id.order()
    }

    /// `sup_ratio / constant_used`; at most 1 exactly when the report passes.
    pub fn normalized(&self) -> f64 {
        self.sup_ratio / self.constant_used
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Scan {
    sup: f64,
    argmax: Option<Argmax>,
    t_min: Option<f64>,
}

impl Scan {
    fn offer(&mut self, ratio: f64, slice: usize, t: f64, cell: usize, spec: &GridSpec) {
        if ratio > self.sup || (self.argmax.is_none() && ratio >= self.sup) {
            let (i, j) = spec.ij(cell);
            let (x, y) = spec.coords(i, j);
            self.sup = ratio;
            self.argmax = Some(Argmax {
                slice,
                t,
                cell,
                x,
                y,
            });
        }
    }

    fn visit(&mut self, t: f64) {
        if self.t_min.is_none() {
            self.t_min = Some(t);
        }
    }

    fn into_report(
        self,
        id: EstimateId,
        mode: CheckMode,
        r: Option<f64>,
        a: Option<f64>,
        constant: f64,
        flags: ReportFlags,
    ) -> EstimateReport {
        EstimateReport {
            id,
            mode,
            r,
            a,
            sup_ratio: self.sup,
            constant_used: constant,
            pass: self.sup <= constant,
            t_min: self.t_min.unwrap_or(f64::NAN),
            argmax: self.argmax,
            flags,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(EstimateError::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn check_ball(trajectory: &FlowTrajectory, ball: &ParabolicBall) -> Result<()> {
    if trajectory.spec() != ball.spec() || ball.num_slices() > trajectory.len() {
        return Err(GeometryError::GridMismatch.into());
    }
    Ok(())
}

/// Region of the order-`k` estimate: `PB_{r/2^k}`.
fn region_fraction(k: usize) -> f64 {
    0.5f64.powi(k as i32)
}

/// `|∇^k u| ≤ C a (1/r^k + 1/t^{k/2})` on `PB_{r/2^k}`, or the time-uniform
/// variant; `k = 1` checks the gradient hypothesis `Ric ≤ 1/r²`, higher
/// orders check `|Rm| ≤ 1/r²`.
pub fn check_derivative_estimate(
    trajectory: &FlowTrajectory,
    ball: &ParabolicBall,
    a: f64,
    k: usize,
    constant: f64,
    mode: CheckMode,
) -> Result<EstimateReport> {
    check_positive("a", a)?;
    if k == 0 {
        return Err(EstimateError::InvalidArgument("derivative order must be at least 1".into()));
    }
    let max = DEFAULT_MAX_RANK - 1;
    if k > max {
        return Err(GeometryError::UnsupportedRank { rank: k, max }.into());
    }
    check_ball(trajectory, ball)?;
    let spec = *ball.spec();
    let r = ball.r;
    let curv_bound = 1.0 / (r * r);
    let mut flags = ReportFlags {
        wraps: ball.wraps(),
        ..Default::default()
    };
    let mut scan = Scan::default();
    let fraction = region_fraction(k);

    for slice in 0..ball.num_slices() {
        let snap = &trajectory.snapshots[slice];
        let t = snap.t;
        let calc = CovariantCalculus::new(&snap.metric);
        let curvature = calc.scalar_curvature();
        let hyp = ball.mask(slice, 1.0);
        for cell in hyp.cells() {
            if snap.u.values()[cell].abs() > a * (1.0 + HYPOTHESIS_SLACK) {
                flags.bound_violated = true;
            }
            let rc = curvature.values()[cell];
            // Ric = (R/2) g in two dimensions
            let curv = if k == 1 { 0.5 * rc } else { rc.abs() };
            if curv > curv_bound * (1.0 + HYPOTHESIS_SLACK) {
                flags.curvature_violated = true;
            }
        }
        let included = match mode {
            CheckMode::Standard => t > 0.0,
            CheckMode::TimeUniform => true,
        };
        let needs_all = mode == CheckMode::TimeUniform && slice == 0;
        if !included && !needs_all {
            continue;
        }
        let derivs = calc.derivatives(&snap.u, k)?;
        if needs_all {
            for (i, d) in derivs.iter().enumerate() {
                let norm = calc.norm(d)?;
                let bound = a / r.powi(i as i32 + 1);
                if hyp.cells().any(|c| norm.values()[c] > bound * (1.0 + HYPOTHESIS_SLACK)) {
                    flags.initial_bound_violated = true;
                }
            }
        }
        if !included {
            continue;
        }
        scan.visit(t);
        let rate = match mode {
            CheckMode::Standard => r.powi(-(k as i32)) + t.powf(-0.5 * k as f64),
            CheckMode::TimeUniform => r.powi(-(k as i32)),
        };
        let norm = calc.norm(&derivs[k - 1])?;
        let denom = a * rate;
        for cell in 0..spec.len() {
            if ball.contains(slice, cell, fraction) {
                scan.offer(norm.values()[cell] / denom, slice, t, cell, &spec);
            }
        }
    }
    let id = match k {
        1 => EstimateId::Gradient,
        2 => EstimateId::Hessian,
        _ => EstimateId::Higher(k),
    };
    Ok(scan.into_report(id, mode, Some(r), Some(a), constant, flags))
}

/// `|∇u| ≤ C₁ a (1/r + 1/√t)` on `PB_{r/2}` for `t > 0`.
pub fn check_gradient_estimate(
    trajectory: &FlowTrajectory,
    ball: &ParabolicBall,
    a: f64,
    c1: f64,
) -> Result<EstimateReport> {
    check_derivative_estimate(trajectory, ball, a, 1, c1, CheckMode::Standard)
}

/// `|∇²u| ≤ C₂ a (1/r² + 1/t)` on `PB_{r/4}` for `t > 0`.
pub fn check_hessian_estimate(
    trajectory: &FlowTrajectory,
    ball: &ParabolicBall,
    a: f64,
    c2: f64,
) -> Result<EstimateReport> {
    check_derivative_estimate(trajectory, ball, a, 2, c2, CheckMode::Standard)
}

/// `|∇^k u| ≤ C_k a (1/r^k + 1/t^{k/2})` on `PB_{r/2^k}`, `2 ≤ k ≤ K_max − 1`.
pub fn check_higher_estimate(
    trajectory: &FlowTrajectory,
    ball: &ParabolicBall,
    a: f64,
    k: usize,
    ck: f64,
) -> Result<EstimateReport> {
    if k < 2 {
        return Err(EstimateError::InvalidArgument(format!("higher estimate needs k ≥ 2, got {k}")));
    }
    check_derivative_estimate(trajectory, ball, a, k, ck, CheckMode::Standard)
}

/// Smallest constant for which the order-`k` derivative estimate holds on
/// this run.
pub fn empirical_constant(trajectory: &FlowTrajectory, ball: &ParabolicBall, a: f64, k: usize) -> Result<f64> {
    Ok(check_derivative_estimate(trajectory, ball, a, k, f64::INFINITY, CheckMode::Standard)?.sup_ratio)
}

/// `|∇^i Rm| ≤ C'_i r^{-2} (1/r^i + 1/t^{i/2})` on `PB_{r/2}`, given
/// `|Rm| ≤ 1/r²` on `PB_r`.
pub fn check_shi_curvature(
    trajectory: &FlowTrajectory,
    ball: &ParabolicBall,
    i: usize,
    constant: f64,
) -> Result<EstimateReport> {
    let max = DEFAULT_MAX_RANK - 2;
    if i == 0 || i > max {
        return Err(GeometryError::UnsupportedOrder { order: i, max }.into());
    }
    check_ball(trajectory, ball)?;
    let spec = *ball.spec();
    let r = ball.r;
    let mut flags = ReportFlags {
        wraps: ball.wraps(),
        ..Default::default()
    };
    let mut scan = Scan::default();
    for slice in 0..ball.num_slices() {
        let snap = &trajectory.snapshots[slice];
        let calc = CovariantCalculus::new(&snap.metric);
        let rm = calc.curvature_derivative_norm(0)?;
        if ball
            .mask(slice, 1.0)
            .cells()
            .any(|c| rm.values()[c] > (1.0 + HYPOTHESIS_SLACK) / (r * r))
        {
            flags.curvature_violated = true;
        }
        let t = snap.t;
        if t <= 0.0 {
            continue;
        }
        scan.visit(t);
        let measured = calc.curvature_derivative_norm(i)?;
        let denom = (r.powi(-(i as i32)) + t.powf(-0.5 * i as f64)) / (r * r);
        for cell in 0..spec.len() {
            if ball.contains(slice, cell, 0.5) {
                scan.offer(measured.values()[cell] / denom, slice, t, cell, &spec);
            }
        }
    }
    Ok(scan.into_report(EstimateId::Shi(i), CheckMode::Standard, Some(r), None, constant, flags))
}

fn global_flags(u: &ScalarField, a: f64, flags: &mut ReportFlags) {
    for &v in u.values() {
        if v <= 0.0 {
            flags.nonpositive = true;
        }
        if v > a * (1.0 + HYPOTHESIS_SLACK) {
            flags.bound_violated = true;
        }
    }
}

fn check_global_trajectory(trajectory: &FlowTrajectory, a: f64) -> Result<()> {
    check_positive("a", a)?;
    if trajectory.len() < 2 {
        return Err(EstimateError::InvalidArgument("trajectory needs a positive-time snapshot".into()));
    }
    Ok(())
}

/// `|∇u|/u ≤ √(1/t) √(ln(a/u))` over `M × (0, T]`; the ratio of the two
/// sides is scanned, with `0/0 = 0` where `u = a` and `∇u = 0`.
pub fn check_zhang_log_gradient(trajectory: &FlowTrajectory, a: f64) -> Result<EstimateReport> {
    check_global_trajectory(trajectory, a)?;
    let spec = *trajectory.spec();
    let mut flags = ReportFlags::default();
    let mut scan = Scan::default();
    for (slice, snap) in trajectory.snapshots.iter().enumerate() {
        global_flags(&snap.u, a, &mut flags);
        if snap.t <= 0.0 {
            continue;
        }
        scan.visit(snap.t);
        let calc = CovariantCalculus::new(&snap.metric);
        let grad = calc.norm(&calc.gradient(&snap.u)?)?;
        for cell in 0..spec.len() {
            let u = snap.u.values()[cell];
            if u <= 0.0 {
                continue;
            }
            let lhs = grad.values()[cell] / u;
            let log = (a / u).ln();
            let ratio = if log > 0.0 {
                lhs / (log / snap.t).sqrt()
            } else if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            scan.offer(ratio, slice, snap.t, cell, &spec);
        }
    }
    Ok(scan.into_report(EstimateId::Zhang, CheckMode::Standard, None, Some(a), 1.0, flags))
}

/// `|Δu| + |∇u|²/u − aR ≤ B a / t` over `M × (0, T]`; the scanned ratio is
/// `(|Δu| + |∇u|²/u − aR) t / a` and the report passes when it is at most `B`.
pub fn check_laplacian_bound(trajectory: &FlowTrajectory, a: f64, b: f64) -> Result<EstimateReport> {
    check_global_trajectory(trajectory, a)?;
    let spec = *trajectory.spec();
    let mut flags = ReportFlags::default();
    let mut scan = Scan::default();
    for (slice, snap) in trajectory.snapshots.iter().enumerate() {
        global_flags(&snap.u, a, &mut flags);
        if snap.t <= 0.0 {
            continue;
        }
        scan.visit(snap.t);
        let calc = CovariantCalculus::new(&snap.metric);
        let grad = calc.norm(&calc.gradient(&snap.u)?)?;
        let lap = calc.laplacian(&snap.u)?;
        let curvature = calc.scalar_curvature();
        for cell in 0..spec.len() {
            let u = snap.u.values()[cell];
            if u <= 0.0 {
                continue;
            }
            let g = grad.values()[cell];
            let lhs = lap.values()[cell].abs() + g * g / u - a * curvature.values()[cell];
            scan.offer(lhs * snap.t / a, slice, snap.t, cell, &spec);
        }
    }
    Ok(scan.into_report(EstimateId::Laplacian, CheckMode::Standard, None, Some(a), b, flags))
}
