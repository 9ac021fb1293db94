use proptest::prelude::*;
use rhl_core::comparison::ConvergenceRecord;
use rhl_core::entropy::*;
use rhl_core::flows::{cfl_limit, conjugate_heat_solve, run_coupled_flow, FlowTrajectory, RunConfig};
use rhl_core::geometry::{ConformalMetric, GridSpec, ScalarField};

fn bump(x: f64, y: f64) -> f64 {
    0.1 * x.sin() * y.sin()
}

/// Curved Ricci flow to `t_final`, then the conjugate solution from a
/// normalised positive final density.
fn conjugate_run(n: usize, dt: f64, stride: usize, t_final: f64) -> FlowTrajectory {
    let spec = GridSpec::square_2pi(n).unwrap();
    let cfg = RunConfig::new("curved", ScalarField::from_fn(spec, bump), ScalarField::zeros(spec), dt, t_final)
        .with_stride(stride);
    let forward = run_coupled_flow(&cfg).unwrap();
    let last = &forward.snapshots.last().unwrap().metric;
    let ut = ScalarField::from_fn(spec, |x, y| (0.5 * x.cos() + 0.3 * y.sin()).exp());
    let mass = last.integrate(&ut);
    conjugate_heat_solve(&forward, &ut.map(|v| v / mass)).unwrap()
}

#[test]
fn conjugate_identity_and_entropy_rate_converge() {
    let dt = cfl_limit(&ConformalMetric::from_fn(GridSpec::square_2pi(32).unwrap(), bump).unwrap());
    let mut residuals = ConvergenceRecord::default();
    let mut defects = ConvergenceRecord::default();
    for (n, step, stride) in [(32, dt, 1), (64, dt / 4.0, 4)] {
        let traj = conjugate_run(n, step, stride, 0.25);
        let t_final = traj.t_final();
        let rec = conjugate_identity_residual(&traj, t_final, 0.0).unwrap();
        residuals.push(rec.h, rec.sup_residual);
        let mono = entropy_monotonicity_check(&traj, t_final, 0.0, 2e-3).unwrap();
        assert!(mono.pass, "{mono:?}");
        assert!(mono.records.iter().all(|r| r.rhs_integral >= 0.0 && r.tau > 0.0));
        defects.push(rec.h, mono.max_abs_defect);
    }
    assert!(residuals.orders()[0] >= 1.8, "{residuals:?}");
    assert!(defects.orders()[0] >= 1.8, "{defects:?}");
}

fn translated(f: &ScalarField, di: usize, dj: usize) -> ScalarField {
    let spec = *f.spec();
    let values = (0..spec.len())
        .map(|c| {
            let (i, j) = spec.ij(c);
            f.get((i + di) % spec.nx, (j + dj) % spec.ny)
        })
        .collect();
    ScalarField::from_values(spec, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn entropy_is_translation_invariant(di in 0usize..16, dj in 0usize..16, a in -0.2f64..0.2, tau in 0.1f64..2.0) {
        let spec = GridSpec::square_2pi(16).unwrap();
        let f = ScalarField::from_fn(spec, |x, y| a * (x + 2.0 * y).sin());
        let metric = ConformalMetric::new(f.clone(), 0.0).unwrap();
        let raw = ScalarField::from_fn(spec, |x, y| 1.0 + 0.4 * (x - y).cos());
        let v = raw.map(|x| x / metric.integrate(&raw.map(|r| r * r)).sqrt());
        let w = w_entropy(&metric, &v, tau).unwrap();
        let moved = ConformalMetric::new(translated(&f, di, dj), 0.0).unwrap();
        let w2 = w_entropy(&moved, &translated(&v, di, dj), tau).unwrap();
        prop_assert!((w - w2).abs() <= 1e-12 * w.abs().max(1.0));
    }

    #[test]
    fn soliton_integrand_is_nonnegative(a in -0.3f64..0.3, tau in 0.05f64..3.0) {
        let spec = GridSpec::square_2pi(16).unwrap();
        let metric = ConformalMetric::from_fn(spec, |x, y| a * x.cos() * y.sin()).unwrap();
        let u = ScalarField::from_fn(spec, |x, y| (a * y.cos() + 0.2 * x.sin()).exp());
        let rhs = soliton_defect(&metric, &u, tau).unwrap();
        prop_assert!(rhs.values().iter().all(|v| *v >= 0.0));
    }
}
