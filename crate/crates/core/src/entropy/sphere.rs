//! Entropy quantities on the shrinking round sphere with the uniform
//! conjugate density `u = 1/vol(g(t))`, a gradient shrinking soliton.

use std::f64::consts::PI;

use crate::flows::{SphereModel, SphereState};

use super::{EntropyError, Result};

fn state(model: &SphereModel, t: f64) -> Result<SphereState> {
    model.state(t).map_err(EntropyError::from)
}

/// `W = τR + ln vol − (n/2) ln(4πτ) − n` for `v² = 1/vol`.
pub fn sphere_w_entropy(model: &SphereModel, t: f64) -> Result<f64> {
    let st = state(model, t)?;
    let n = model.dimension() as f64;
    Ok(st.tau * st.scalar_curvature + st.volume.ln() - 0.5 * n * (4.0 * PI * st.tau).ln() - n)
}

/// `dW/dt` differentiated term by term:
/// `(τR)' + vol'/vol − (n/2) τ'/τ` with `s' = −2(n−1)`, `τ' = −1`,
/// `R' = −n(n−1)s'/s²` and `vol'/vol = (n/2)s'/s`.
pub fn sphere_entropy_rate(model: &SphereModel, t: f64) -> Result<f64> {
    let st = state(model, t)?;
    let n = model.dimension() as f64;
    let ds = -2.0 * (n - 1.0);
    let dtau = -1.0;
    let dr = -n * (n - 1.0) * ds / (st.scale * st.scale);
    Ok(dtau * st.scalar_curvature + st.tau * dr + 0.5 * n * ds / st.scale - 0.5 * n * dtau / st.tau)
}

/// Both sides of `H*P(u) = 2τ|Ric − Hess ln u − g/(2τ)|²u` for the
/// spatially constant conjugate solution `u = c s^{−n/2}`.
///
/// With `P = u·q`, `q = τR − ln u − (n/2) ln(4πτ) − n` and `∂_t u = Ru`,
/// `H*P = ∂_t P − RP = u q'` where `q' = (τR)' − R + (n/2)/τ`. On the right,
/// `Ric = ((n−1)/s) g` and `Hess ln u = 0`, so
/// `|Ric − g/(2τ)|² = n((n−1)/s − 1/(2τ))²`.
pub fn sphere_conjugate_sides(model: &SphereModel, t: f64, c: f64) -> Result<(f64, f64)> {
    let st = state(model, t)?;
    let n = model.dimension() as f64;
    let u = c * st.conjugate_factor;
    let ds = -2.0 * (n - 1.0);
    let d_tau_r = -st.scalar_curvature + st.tau * (-n * (n - 1.0) * ds / (st.scale * st.scale));
    let lhs = u * (d_tau_r - st.scalar_curvature + 0.5 * n / st.tau);
    let gap = (n - 1.0) / st.scale - 0.5 / st.tau;
    let rhs = 2.0 * st.tau * n * gap * gap * u;
    Ok((lhs, rhs))
}
