//! The shrinking round sphere `g(t) = (1 − 2(n−1)t) g_{S^n}`.

use std::f64::consts::PI;

use super::{FlowError, Result};

/// Volume of the unit round `S^n`.
pub fn unit_sphere_volume(n: usize) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * unit_sphere_volume(n - 2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereModel {
    n: usize,
}

/// Closed-form quantities of the sphere model at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereState {
    pub t: f64,
    /// `1 − 2(n−1)t`, the factor multiplying the unit round metric.
    pub scale: f64,
    /// Time remaining until extinction, `scale / (2(n−1))`.
    pub tau: f64,
    pub scalar_curvature: f64,
    /// First nonzero Laplace eigenvalue.
    pub lambda1: f64,
    pub volume: f64,
    /// `u(x, t) = amplitude · Y(x)` solves the heat equation for a first
    /// spherical harmonic `Y` with `amplitude(0) = 1`.
    pub heat_mode_amplitude: f64,
    /// Spatially constant conjugate heat solution with value 1 at `t = 0`.
    pub conjugate_factor: f64,
}

impl SphereModel {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(FlowError::InvalidConfig(format!(
                "sphere dimension must be at least 2, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Extinction time `1/(2(n−1))`.
    pub fn blowup_time(&self) -> f64 {
        1.0 / (2.0 * (self.n as f64 - 1.0))
    }

    pub fn scale(&self, t: f64) -> Result<f64> {
        let blowup = self.blowup_time();
        if !(0.0..blowup).contains(&t) {
            return Err(FlowError::Domain { t, blowup });
        }
        Ok(1.0 - 2.0 * (self.n as f64 - 1.0) * t)
    }

    /// Distance at time `t` from the pole to a point at polar angle `theta`.
    pub fn distance_from_pole(&self, theta: f64, t: f64) -> Result<f64> {
        Ok(self.scale(t)?.sqrt() * theta)
    }

    pub fn state(&self, t: f64) -> Result<SphereState> {
        let s = self.scale(t)?;
        let n = self.n as f64;
        Ok(SphereState {
            t,
            scale: s,
            tau: s / (2.0 * (n - 1.0)),
            scalar_curvature: n * (n - 1.0) / s,
            lambda1: n / s,
            volume: unit_sphere_volume(self.n) * s.powf(0.5 * n),
            heat_mode_amplitude: s.powf(n / (2.0 * (n - 1.0))),
            conjugate_factor: s.powf(-0.5 * n),
        })
    }
}

pub fn sphere_exact(model: &SphereModel, t: f64) -> Result<SphereState> {
    model.state(t)
}
