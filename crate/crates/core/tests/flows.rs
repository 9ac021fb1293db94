use rhl_core::flows::{cfl_limit, conjugate_heat_solve, run_coupled_flow, RunConfig};
use rhl_core::geometry::{ConformalMetric, GridSpec, ScalarField};

fn curved_run(n: usize, t_final: f64) -> rhl_core::flows::FlowTrajectory {
    let spec = GridSpec::square_2pi(n).unwrap();
    let f0 = ScalarField::from_fn(spec, |x, y| 0.1 * x.sin() * y.sin());
    let u0 = ScalarField::from_fn(spec, |x, _| 1.0 + 0.5 * x.cos());
    let dt = cfl_limit(&ConformalMetric::new(f0.clone(), 0.0).unwrap());
    run_coupled_flow(&RunConfig::new("curved", f0, u0, dt, t_final)).unwrap()
}

#[test]
fn torus_area_is_conserved() {
    let traj = curved_run(64, 0.25);
    let a0 = traj.snapshots[0].metric.total_area();
    for s in &traj.snapshots {
        let rel = (s.metric.total_area() - a0).abs() / a0;
        assert!(rel < 1e-6, "t = {}: {rel}", s.t);
    }
}

#[test]
fn conjugate_mass_is_conserved() {
    let traj = curved_run(64, 0.25);
    let spec = *traj.spec();
    let u_t = ScalarField::from_fn(spec, |x, y| 1.0 + 0.3 * (x - y).cos() + 0.2 * (2.0 * y).sin());
    let conj = conjugate_heat_solve(&traj, &u_t).unwrap();
    let m_t = conj.snapshots.last().unwrap().metric.integrate(&u_t);
    let mut worst: f64 = 0.0;
    for s in &conj.snapshots {
        worst = worst.max((s.metric.integrate(&s.u) - m_t).abs() / m_t);
    }
    eprintln!("worst relative mass drift {worst:e}");
    assert!(worst < 1e-6);
}
