use crate::flows::{FlowTrajectory, SphereModel};
use crate::geometry::{geodesic_distance, BallMask, GridSpec, ScalarField};

use super::{EstimateError, Result};

/// `PB_r(x₀, T)`: per-snapshot distance fields from `x₀` for every snapshot
/// with `t ≤ T`. Sub-balls `PB_{r/2^m}` are read off the same fields.
#[derive(Debug, Clone)]
pub struct ParabolicBall {
    pub x0: (usize, usize),
    pub r: f64,
    pub t_final: f64,
    distances: Vec<ScalarField>,
    times: Vec<f64>,
    /// Smallest systole estimate `min(Lx, Ly)·e^{min f}` over the slices.
    pub systole: f64,
}

impl ParabolicBall {
    pub fn spec(&self) -> &GridSpec {
        self.distances[0].spec()
    }

    /// Number of snapshots covered, counted from the start of the trajectory.
    pub fn num_slices(&self) -> usize {
        self.distances.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn distance(&self, slice: usize) -> &ScalarField {
        &self.distances[slice]
    }

    /// Mask of the closed ball of radius `r · fraction` at one slice.
    pub fn mask(&self, slice: usize, fraction: f64) -> BallMask {
        BallMask::from_distance(&self.distances[slice], self.r * fraction)
    }

    pub fn contains(&self, slice: usize, cell: usize, fraction: f64) -> bool {
        self.distances[slice].values()[cell] <= self.r * fraction
    }

    /// The ball reaches around the torus (no compact-closure surrogate).
    pub fn wraps(&self) -> bool {
        self.r >= 0.5 * self.systole
    }
}

/// Builds `PB_r(x₀, T)` from the snapshots of `trajectory` with `t ≤ T`.
pub fn parabolic_ball(
    trajectory: &FlowTrajectory,
    x0: (usize, usize),
    r: f64,
    t_final: f64,
) -> Result<ParabolicBall> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(EstimateError::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let eps = 1e-9 * trajectory.snapshot_interval().max(f64::MIN_POSITIVE);
    if trajectory.is_empty() || t_final > trajectory.t_final() + eps {
        return Err(EstimateError::InvalidArgument(format!(
            "T = {t_final} exceeds trajectory final time {}",
            trajectory.t_final()
        )));
    }
    let mut distances = Vec::new();
    let mut times = Vec::new();
    let mut systole = f64::INFINITY;
    for snap in trajectory.snapshots.iter().take_while(|s| s.t <= t_final + eps) {
        distances.push(geodesic_distance(&snap.metric, x0)?);
        times.push(snap.t);
        let spec = snap.metric.spec();
        systole = systole.min(spec.lx.min(spec.ly) * snap.metric.exponent().min().exp());
    }
    Ok(ParabolicBall {
        x0,
        r,
        t_final,
        distances,
        times,
        systole,
    })
}

/// Parabolic ball about a pole of the shrinking sphere, described in polar
/// angle.
#[derive(Debug, Clone, Copy)]
pub struct SphereBall {
    pub model: SphereModel,
    pub r: f64,
}

impl SphereBall {
    /// Largest polar angle inside the ball at time `t`.
    pub fn angular_radius(&self, t: f64) -> Result<f64> {
        let scale = self
            .model
            .scale(t)
            .map_err(|e| EstimateError::InvalidArgument(e.to_string()))?;
        Ok(self.r / scale.sqrt())
    }

    pub fn contains(&self, theta: f64, t: f64) -> Result<bool> {
        Ok(theta <= self.angular_radius(t)?)
    }
}
