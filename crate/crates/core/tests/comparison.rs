use rhl_core::comparison::*;
use rhl_core::estimates::parabolic_ball;
use rhl_core::flows::{cfl_limit, run_coupled_flow, FlowTrajectory, RunConfig, SphereModel};
use rhl_core::geometry::{ConformalMetric, GridSpec, ScalarField};

fn run(n: usize, f0: fn(f64, f64) -> f64, u0: fn(f64, f64) -> f64, dt: f64, stride: usize, t: f64) -> FlowTrajectory {
    let spec = GridSpec::square_2pi(n).unwrap();
    let cfg = RunConfig::new(
        "probe",
        ScalarField::from_fn(spec, f0),
        ScalarField::from_fn(spec, u0),
        dt,
        t,
    )
    .with_stride(stride);
    run_coupled_flow(&cfg).unwrap()
}

fn curved_f(x: f64, y: f64) -> f64 {
    0.1 * x.sin() * y.sin()
}

fn coarse_dt(n: usize, f0: fn(f64, f64) -> f64) -> f64 {
    cfl_limit(&ConformalMetric::from_fn(GridSpec::square_2pi(n).unwrap(), f0).unwrap())
}

#[test]
fn curved_identity_residual_converges_at_second_order() {
    let dt = coarse_dt(32, curved_f);
    let u0 = |x: f64, _: f64| 1.0 + 0.5 * x.cos();
    let mut rec = ConvergenceRecord::default();
    for (n, step, stride) in [(32, dt, 1), (64, dt / 4.0, 4)] {
        let r1 = check_identity_residual(&run(n, curved_f, u0, step, stride, 0.1), 1).unwrap();
        rec.push(r1.h, r1.sup_residual);
    }
    let order = rec.orders()[0];
    assert!((1.7..=2.3).contains(&order), "{order}");
}

#[test]
fn curvature_fit_is_stable_from_64_to_128() {
    let dt = coarse_dt(64, curved_f);
    let u0 = |x: f64, _: f64| 1.0 + 0.5 * x.cos();
    let fits: Vec<f64> = [(64, dt, 1), (128, dt / 4.0, 4)]
        .into_iter()
        .map(|(n, step, stride)| {
            check_identity_residual(&run(n, curved_f, u0, step, stride, 0.1), 2).unwrap().c_fit.unwrap()
        })
        .collect();
    let spread = fits[0].max(fits[1]) / fits[0].min(fits[1]);
    assert!(fits.iter().all(|c| c.is_finite()) && spread <= 2.0, "{fits:?}");
}

#[test]
fn flat_grid_barrier_calibration() {
    let f0 = |_: f64, _: f64| 0.0;
    let u0 = |x: f64, _: f64| x.sin();
    let traj = run(32, f0, u0, coarse_dt(32, f0), 2, 0.1);
    let ball = parabolic_ball(&traj, (16, 16), 1.0, 0.1).unwrap();
    let p = BarrierParams::new(1.0, 1.0);
    let kind = BarrierKind::Psi(1);
    let alpha = calibrate_grid_alpha(&traj, &ball, kind, &p, 1e-6).unwrap();
    let at = check_barrier_inequality(&traj, &ball, kind, &p.with_alpha(alpha), 1e-6).unwrap();
    let below = check_barrier_inequality(&traj, &ball, kind, &p.with_alpha(0.99 * alpha), 1e-6).unwrap();
    assert!(at.pass && !below.pass);
    assert!(at.checked_points > at.skipped_cut_locus);
    // metrication only ever adds to the sharp continuum value
    assert!(alpha >= flat_alpha(2, 1));
}

#[test]
fn flat_bernstein_tolerance_shrinks() {
    let ledger = ConstantLedger::standard(2, 1.0, 2).unwrap();
    let f0 = |_: f64, _: f64| 0.0;
    let u0 = |x: f64, _: f64| x.sin();
    let dt = coarse_dt(32, f0);
    let mut prev: Option<BernsteinReport> = None;
    for (n, step, stride) in [(32, dt, 1), (64, dt / 4.0, 4)] {
        let traj = run(n, f0, u0, step, stride, 0.1);
        let ball = parabolic_ball(&traj, (n / 2, n / 2), 1.0, 0.1).unwrap();
        let rep = check_bernstein_inequality(&traj, &ball, &ledger, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
        if let Some(p) = prev {
            assert!(rep.tolerance < p.tolerance && rep.defect <= p.defect);
        }
        prev = Some(rep);
    }
}

#[test]
fn sphere_phi_barriers_hold_with_ledger_constants() {
    let model = SphereModel::new(2).unwrap();
    let base = BarrierParams::new(1.0, 1.0);
    let samples = sphere_samples(&model, BarrierKind::Psi(2), 1.0, 20, 20, 0.4).unwrap();
    let alpha2 = calibrate_sphere_alpha(&model, BarrierKind::Psi(2), &base, &samples).unwrap();
    let gamma = solve_gamma(1).unwrap();
    let beta = solve_beta(1, alpha2, gamma).unwrap();
    let p = BarrierParams {
        alpha: alpha2,
        beta,
        gamma,
        r: 1.0,
    };
    let rep = check_sphere_barrier(&model, BarrierKind::Phi(2), &p, &samples, 1e-9).unwrap();
    assert!(rep.pass, "{rep:?}");
}
