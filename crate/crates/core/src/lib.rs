//! Numerical laboratory for the heat and conjugate heat equations coupled to
//! two-dimensional Ricci flow.
//!
//! * [`geometry`]: conformal metrics on a periodic rectangle and their
//!   covariant calculus.
//! * [`flows`]: Runge–Kutta stepping of Ricci flow, the coupled heat
//!   equation and the conjugate heat equation, plus the exact shrinking
//!   round sphere.
//! * [`estimates`]: parabolic balls and checkers for local derivative
//!   bounds.
//! * [`comparison`]: explicit constant chains, barrier functions and
//!   differential-inequality checks.
//! * [`entropy`]: the W-entropy, the density `P(u)` and their evolution
//!   identities.

pub mod geometry;
pub mod flows;
pub mod estimates;
pub mod comparison;
pub mod entropy;
