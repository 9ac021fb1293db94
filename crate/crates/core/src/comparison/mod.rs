//! Constant chains, barrier functions and the differential inequalities
//! behind the derivative estimates.

mod barrier;
mod constants;
mod identity;
mod symbolic;

pub use barrier::{
    barrier_eval, barrier_jet, barrier_target, calibrate_grid_alpha, calibrate_sphere_alpha,
    check_barrier_inequality, check_sphere_barrier, radial_check, sphere_samples, BarrierField,
    BarrierJet, BarrierKind, BarrierParams, BarrierReport, RadialCheck, RhoJet, SphereBarrierReport,
};
pub use constants::{
    b_root_first, b_root_residuals, b_root_second, beta_slack, flat_alpha, gamma_coefficients,
    gamma_slack, ledger_c1, solve_b_prop32, solve_beta, solve_gamma, ConstantLedger, LedgerRow,
    LedgerViolation, OrderConstants, Provenance, ROOT_TOLERANCE,
};
pub use identity::{
    check_bernstein_inequality, check_identity_residual, BernsteinReport, ConvergenceRecord,
    IdentityRecord, BERNSTEIN_TOLERANCE_FACTOR, FIT_FLOOR,
};
pub use symbolic::{derive_cross_constant, first_bernstein_expansion, heat_operator, Atom, Poly, UnknownRule};

use thiserror::Error;

use crate::estimates::EstimateError;
use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum ComparisonError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no bracket found within 2^60 expansion")]
    BracketNotFound,
    #[error("ledger certificate failed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Ledger(Vec<LedgerViolation>),
    #[error("need at least 3 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

pub type Result<T> = std::result::Result<T, ComparisonError>;
