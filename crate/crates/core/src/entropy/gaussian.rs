//! Closed-form `P(u)` for the Euclidean heat kernel
//! `u = (4πτ)^{−n/2} e^{−|x|²/(4τ)}` on flat `ℝⁿ`, evaluated without a grid.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::perelman_p_pointwise;

/// `P(u)` at `x` for the Gaussian of scale `τ`, using the exact
/// derivatives `Δu = u(|x|²/(4τ²) − n/(2τ))` and `|∇u|² = u²|x|²/(4τ²)`.
pub fn gaussian_p(x: &[f64], tau: f64) -> f64 {
    let n = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let u = (4.0 * PI * tau).powf(-0.5 * n) * (-r2 / (4.0 * tau)).exp();
    let lap = u * (r2 / (4.0 * tau * tau) - n / (2.0 * tau));
    let grad_sq = u * u * r2 / (4.0 * tau * tau);
    perelman_p_pointwise(u, lap, grad_sq, 0.0, tau, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScan {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub max_abs: f64,
    /// `(x, τ)` where `|P|` is largest.
    pub worst: (Vec<f64>, f64),
}

/// `|P(u)|` at `samples` seeded points with `x ∈ [−3, 3]ⁿ`, `τ ∈ [0.1, 2]`.
pub fn gaussian_p_scan(n: usize, samples: usize, seed: u64) -> GaussianScan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scan = GaussianScan {
        n,
        samples,
        seed,
        max_abs: 0.0,
        worst: (vec![0.0; n], 1.0),
    };
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        for xi in x.iter_mut() {
            *xi = rng.gen_range(-3.0..=3.0);
        }
        let tau = rng.gen_range(0.1..=2.0);
        let p = gaussian_p(&x, tau).abs();
        if p > scan.max_abs {
            scan.max_abs = p;
            scan.worst = (x.clone(), tau);
        }
    }
    scan
}
