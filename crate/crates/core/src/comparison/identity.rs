//! Evolution identities for `|∇^k u|²` and the Bernstein inequalities for
//! `F_m`, both checked with centred time differences on interior snapshots.

use crate::estimates::ParabolicBall;
use crate::flows::{FlowTrajectory, Snapshot};
use crate::geometry::{CovariantCalculus, GeometryError, ScalarField};

use super::barrier::{barrier_target, BarrierKind, BarrierParams};
use super::constants::ConstantLedger;
use super::{ComparisonError, Result};

/// Points whose curvature term is below this fraction of its sup are left
/// out of the `c_fit` ratio.
pub const FIT_FLOOR: f64 = 0.01;

/// Multiple of the identity-residual scale allowed as Bernstein defect.
pub const BERNSTEIN_TOLERANCE_FACTOR: f64 = 5.0;

/// `|∇^j u|²` for `j = 0..=upto` at one snapshot.
fn squared_norms(snap: &Snapshot, upto: usize) -> Result<Vec<ScalarField>> {
    let calc = CovariantCalculus::with_max_rank(&snap.metric, upto.max(1));
    let mut out = vec![snap.u.map(|v| v * v)];
    for d in calc.derivatives(&snap.u, upto)? {
        out.push(calc.norm(&d)?.map(|v| v * v));
    }
    Ok(out)
}

fn require_slices(n: usize) -> Result<()> {
    if n < 3 {
        Err(ComparisonError::TooFewSnapshots(n))
    } else {
        Ok(())
    }
}

/// Residual of the `|∇^k u|²` evolution identity on one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityRecord {
    pub k: usize,
    /// Sup over interior slices of `|(∂_t − Δ)|∇^k u|² + 2|∇^{k+1}u|²|`.
    pub sup_residual: f64,
    /// For `k ≥ 2`, the smallest `c` with
    /// `|residual| ≤ c Σ_{i ≤ k−2} |∇^i Rm||∇^{k−i}u||∇^k u|` at the fitted
    /// points; `None` when the curvature term vanishes identically.
    pub c_fit: Option<f64>,
    pub slices_checked: usize,
    pub h: f64,
    pub snapshot_dt: f64,
}

/// Checks `(∂_t − Δ)|∇u|² = −2|∇²u|²` for `k = 1`, and for `k ≥ 2` fits
/// the curvature coefficient of
/// `(∂_t − Δ)|∇^k u|² = −2|∇^{k+1}u|² + Σ_{i=0}^{k−2} ∇^i Rm ∗ ∇^{k−i}u ∗ ∇^k u`.
pub fn check_identity_residual(trajectory: &FlowTrajectory, k: usize) -> Result<IdentityRecord> {
    if k == 0 || k + 1 > crate::geometry::DEFAULT_MAX_RANK {
        return Err(ComparisonError::InvalidArgument(format!(
            "identity order must be in 1..={}, got {k}",
            crate::geometry::DEFAULT_MAX_RANK - 1
        )));
    }
    let snaps = &trajectory.snapshots;
    require_slices(snaps.len())?;
    let norms: Vec<Vec<ScalarField>> = snaps.iter().map(|s| squared_norms(s, k + 1)).collect::<Result<_>>()?;
    let spec = *trajectory.spec();
    let mut sup_residual: f64 = 0.0;
    // (|residual|, curvature term) at every interior point
    let mut pairs = Vec::new();
    for s in 1..snaps.len() - 1 {
        let calc = CovariantCalculus::with_max_rank(&snaps[s].metric, k + 1);
        let lap = calc.laplacian(&norms[s][k])?;
        let dt2 = snaps[s + 1].t - snaps[s - 1].t;
        let curvature: Vec<ScalarField> = if k >= 2 {
            (0..=k - 2).map(|i| calc.curvature_derivative_norm(i)).collect::<std::result::Result<_, _>>()?
        } else {
            Vec::new()
        };
        for c in 0..spec.len() {
            let dq = (norms[s + 1][k].values()[c] - norms[s - 1][k].values()[c]) / dt2;
            let res = (dq - lap.values()[c] + 2.0 * norms[s][k + 1].values()[c]).abs();
            sup_residual = sup_residual.max(res);
            if k >= 2 {
                let top = norms[s][k].values()[c].sqrt();
                let term: f64 = curvature
                    .iter()
                    .enumerate()
                    .map(|(i, rm)| rm.values()[c] * norms[s][k - i].values()[c].sqrt() * top)
                    .sum();
                pairs.push((res, term));
            }
        }
    }
    let term_sup = pairs.iter().fold(0.0f64, |m, p| m.max(p.1));
    let c_fit = if k >= 2 && term_sup > 0.0 {
        Some(
            pairs
                .iter()
                .filter(|p| p.1 >= FIT_FLOOR * term_sup)
                .fold(0.0f64, |m, p| m.max(p.0 / p.1)),
        )
    } else {
        None
    };
    Ok(IdentityRecord {
        k,
        sup_residual,
        c_fit,
        slices_checked: snaps.len() - 2,
        h: spec.h_min(),
        snapshot_dt: trajectory.snapshot_interval(),
    })
}

/// Residual sup-norms of one check across grid refinements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceRecord {
    /// `(h, residual)` from coarse to fine.
    pub levels: Vec<(f64, f64)>,
}

impl ConvergenceRecord {
    pub fn push(&mut self, h: f64, residual: f64) {
        self.levels.push((h, residual));
    }

    /// `residual(coarse) / residual(fine)` for consecutive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[0].1 / w[1].1).collect()
    }

    /// Observed orders `log(r_c/r_f)/log(h_c/h_f)`.
    pub fn orders(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
            .collect()
    }

    pub fn is_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

/// Defect of `(∂_t − Δ)F_m ≤ target` over the ball interior.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinReport {
    pub m: usize,
    /// Sup of the positive part of `(∂_t − Δ)F_m − target`.
    pub defect: f64,
    /// `5 ×` the identity residual carried into `F_m` units.
    pub tolerance: f64,
    pub points: usize,
    pub argmax: Option<(usize, usize)>,
    /// The ledger failed its certificate; the check is not meaningful.
    pub ledger_violation: bool,
    /// `|u| ≤ a` failed somewhere on the ball.
    pub bound_violated: bool,
    pub pass: bool,
}

/// Checks `(∂_t − Δ)F₁ ≤ −F₁²` and, for `m ≥ 2`,
/// `(∂_t − Δ)F_m ≤ −F_m²/v^{m−1} + v^{m+1}` with `v = 1/r² + 1/t`,
/// `F_m = b_m G_m / v^{m−1}` and
/// `G_m = (A_m a² (1/r^{2(m−1)} + 1/t^{m−1}) + |∇^{m−1}u|²)|∇^m u|²`
/// (`G₁ = (A₁a² + u²)|∇u|²`). The region is `PB_{r/2^{m−1}}`.
pub fn check_bernstein_inequality(
    trajectory: &FlowTrajectory,
    ball: &ParabolicBall,
    ledger: &ConstantLedger,
    m: usize,
) -> Result<BernsteinReport> {
    let order = ledger
        .order(m)
        .ok_or_else(|| ComparisonError::InvalidArgument(format!("ledger has no order {m}")))?;
    if trajectory.spec() != ball.spec() || ball.num_slices() > trajectory.len() {
        return Err(GeometryError::GridMismatch.into());
    }
    let slices = ball.num_slices();
    require_slices(slices)?;
    let ledger_violation = !ledger.certify().is_empty();
    let (a, r) = (ledger.a, ball.r);
    let (b, weight) = (order.b, order.a_weight);
    let kind = BarrierKind::Phi(m);
    let params = BarrierParams::new(1.0, r);
    let fraction = kind.radius_fraction();
    let spec = *ball.spec();
    let snaps = &trajectory.snapshots[..slices];

    let norms: Vec<Vec<ScalarField>> = snaps.iter().map(|s| squared_norms(s, m + 1)).collect::<Result<_>>()?;
    let weight_at = |t: f64| {
        if m == 1 {
            weight * a * a
        } else {
            weight * a * a * (r.powi(-2 * (m as i32 - 1)) + t.powi(-(m as i32 - 1)))
        }
    };
    let v_at = |t: f64| 1.0 / (r * r) + 1.0 / t;
    let f_field = |s: usize| -> ScalarField {
        let t = snaps[s].t;
        let w = weight_at(t);
        let norm = if m == 1 { 1.0 } else { v_at(t).powi(m as i32 - 1) };
        norms[s][m - 1].zip_map(&norms[s][m], |low, top| b * (w + low) * top / norm).expect("aligned")
    };

    let mut report = BernsteinReport {
        m,
        defect: 0.0,
        tolerance: 0.0,
        points: 0,
        argmax: None,
        ledger_violation,
        bound_violated: false,
        pass: false,
    };
    let mut residual_scale: f64 = 0.0;
    for s in 1..slices - 1 {
        if m >= 2 && snaps[s - 1].t <= 0.0 {
            continue;
        }
        let t = snaps[s].t;
        let calc = CovariantCalculus::with_max_rank(&snaps[s].metric, m + 1);
        let (fm, f0, fp) = (f_field(s - 1), f_field(s), f_field(s + 1));
        let lap_f = calc.laplacian(&f0)?;
        let lap_q = calc.laplacian(&norms[s][m])?;
        let dt2 = snaps[s + 1].t - snaps[s - 1].t;
        let w = weight_at(t);
        let vnorm = if m == 1 { 1.0 } else { v_at(t).powi(m as i32 - 1) };
        for c in 0..spec.len() {
            if !ball.contains(s, c, fraction) {
                continue;
            }
            if snaps[s].u.values()[c].abs() > a {
                report.bound_violated = true;
            }
            let heat = (fp.values()[c] - fm.values()[c]) / dt2 - lap_f.values()[c];
            let target = barrier_target(kind, &params, f0.values()[c], t);
            let excess = (heat - target).max(0.0);
            let dq = (norms[s + 1][m].values()[c] - norms[s - 1][m].values()[c]) / dt2;
            let res = (dq - lap_q.values()[c] + 2.0 * norms[s][m + 1].values()[c]).abs();
            residual_scale = residual_scale.max(b * (w + norms[s][m - 1].values()[c]) * res / vnorm);
            report.points += 1;
            if excess > report.defect || report.argmax.is_none() {
                report.defect = report.defect.max(excess);
                report.argmax = Some((s, c));
            }
        }
    }
    report.tolerance = BERNSTEIN_TOLERANCE_FACTOR * residual_scale;
    report.pass = !report.ledger_violation && !report.bound_violated && report.defect <= report.tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::parabolic_ball;
    use crate::flows::{cfl_limit, run_coupled_flow, RunConfig};
    use crate::geometry::{ConformalMetric, GridSpec};

    fn flat_run(n: usize, u0: impl Fn(f64, f64) -> f64, t: f64) -> FlowTrajectory {
        let spec = GridSpec::square_2pi(n).unwrap();
        let dt = cfl_limit(&ConformalMetric::flat(spec));
        let cfg = RunConfig::new("flat", ScalarField::zeros(spec), ScalarField::from_fn(spec, u0), dt, t);
        run_coupled_flow(&cfg).unwrap()
    }

    #[test]
    fn constant_solution_has_zero_residual() {
        let traj = flat_run(16, |_, _| 0.7, 0.05);
        for k in 1..=3 {
            let rec = check_identity_residual(&traj, k).unwrap();
            assert_eq!(rec.sup_residual, 0.0);
            assert_eq!(rec.c_fit, None);
        }
    }

    #[test]
    fn heat_mode_identity_oracle() {
        // Continuum check of the oracle: with q = e^{−2t}cos²x,
        // ∂_t q = −2q and Δq = e^{−2t}(2 sin²x − 2cos²x), so
        // (∂_t − Δ)q = −2e^{−2t}sin²x = −2|∇²u|².
        let (t, x) = (0.3f64, 0.9f64);
        let q = (-2.0 * t).exp() * x.cos().powi(2);
        let lap = (-2.0 * t).exp() * (2.0 * x.sin().powi(2) - 2.0 * x.cos().powi(2));
        assert!((-2.0 * q - lap + 2.0 * (-2.0 * t).exp() * x.sin().powi(2)).abs() < 1e-15);

        let coarse = check_identity_residual(&flat_run(32, |x, _| x.sin(), 0.1), 1).unwrap();
        let fine = check_identity_residual(&flat_run(64, |x, _| x.sin(), 0.1), 1).unwrap();
        assert!(coarse.sup_residual < 0.05);
        let ratio = coarse.sup_residual / fine.sup_residual;
        assert!((3.4..=4.6).contains(&ratio), "{ratio}");
    }

    #[test]
    fn rejects_bad_orders_and_short_runs() {
        let traj = flat_run(16, |x, _| x.sin(), 0.05);
        assert!(check_identity_residual(&traj, 0).is_err());
        assert!(check_identity_residual(&traj, 4).is_err());
        let mut short = traj.clone();
        short.snapshots.truncate(2);
        assert!(matches!(check_identity_residual(&short, 1), Err(ComparisonError::TooFewSnapshots(2))));
    }

    #[test]
    fn convergence_record() {
        let mut rec = ConvergenceRecord::default();
        rec.push(0.2, 1.0);
        rec.push(0.1, 0.25);
        assert_eq!(rec.ratios(), vec![4.0]);
        assert!((rec.orders()[0] - 2.0).abs() < 1e-12);
        assert!(rec.is_decreasing());
    }

    #[test]
    fn bernstein_constant_and_heat_mode() {
        let ledger = ConstantLedger::standard(2, 1.0, 2).unwrap();
        let traj = flat_run(32, |_, _| 0.5, 0.05);
        let ball = parabolic_ball(&traj, (16, 16), 1.0, 0.05).unwrap();
        let rep = check_bernstein_inequality(&traj, &ball, &ledger, 1).unwrap();
        assert_eq!(rep.defect, 0.0);
        assert!(rep.pass);

        let traj = flat_run(32, |x, _| x.sin(), 0.1);
        let ball = parabolic_ball(&traj, (16, 16), 1.0, 0.1).unwrap();
        let rep = check_bernstein_inequality(&traj, &ball, &ledger, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.points > 0 && rep.tolerance > 0.0);
    }

    #[test]
    fn corrupted_ledger_is_flagged() {
        let mut ledger = ConstantLedger::standard(2, 1.0, 1).unwrap();
        ledger.orders[0].a_weight = 0.01;
        let traj = flat_run(16, |x, _| x.sin(), 0.05);
        let ball = parabolic_ball(&traj, (8, 8), 1.0, 0.05).unwrap();
        let rep = check_bernstein_inequality(&traj, &ball, &ledger, 1).unwrap();
        assert!(rep.ledger_violation);
        assert!(!rep.pass);
    }
}
