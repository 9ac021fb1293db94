//! Explicit constants of the Bernstein argument, computed by root solving
//! and certified by back-substitution.

use std::f64::consts::E;
use std::fmt;

use super::symbolic::derive_cross_constant;
use super::{ComparisonError, Result};

/// Certification slack for root-solved quantities.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Coefficients `(c₁, c₀)` of the time-barrier constraint
/// `γ² ≥ c₁γ + c₀` at induction index `k` (the barrier for `∇^{k+1}u`).
pub fn gamma_coefficients(k: usize) -> (f64, f64) {
    let kf = k as f64;
    let c1 = 2f64.powi(k as i32 - 1) * (kf + 1.0) * (1.0 + (kf + 2.0) / (2.0 * (kf + 1.0)));
    let c0 = 2f64.powi(2 * k as i32 + 1) + kf / (2.0 * (kf + 1.0));
    (c1, c0)
}

/// `γ² − c₁γ − c₀`; nonnegative exactly when `γ` is admissible.
pub fn gamma_slack(k: usize, gamma: f64) -> f64 {
    let (c1, c0) = gamma_coefficients(k);
    gamma * gamma - c1 * gamma - c0
}

/// Larger root of `γ² = c₁γ + c₀`.
pub fn solve_gamma(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(ComparisonError::InvalidArgument("gamma index starts at 1".into()));
    }
    let (c1, c0) = gamma_coefficients(k);
    Ok(0.5 * (c1 + (c1 * c1 + 4.0 * c0).sqrt()))
}

/// `LHS − RHS` of the space-barrier constraint on `β` at index `k`.
///
/// For `k = 1` this is
/// `β²α⁴ − ¾(2β(α³ + 4α²))^{4/3} − ⅛β(α³ + 4α²) − (γ/2 + 8)/48`;
/// for `k ≥ 2` the family constraint with exponent `2(k+1)/(k+2)`.
pub fn beta_slack(k: usize, alpha: f64, gamma: f64, beta: f64) -> f64 {
    if k == 1 {
        let w = alpha.powi(3) + 4.0 * alpha * alpha;
        return beta * beta * alpha.powi(4)
            - 0.75 * (2.0 * beta * w).powf(4.0 / 3.0)
            - beta * w / 8.0
            - (gamma / 2.0 + 8.0) / 48.0;
    }
    let kf = k as f64;
    let ki = k as i32;
    let w = alpha.powi(ki + 2) + kf / 4f64.powi(ki - 2) * alpha.powi(ki + 1);
    let young = (kf + 2.0) / (2.0 * (kf + 1.0))
        * (2f64.powi(ki - 1) * beta * (kf + 1.0) * w).powf(2.0 * (kf + 1.0) / (kf + 2.0));
    let linear = beta * (kf + 1.0) / 2f64.powi(4 * ki * ki - ki + 1) * w;
    let constant = (kf * gamma + 2f64.powi(ki + 3)) / 2f64.powi(8 * ki * ki + 7 * ki + 2);
    beta * beta * alpha.powi(2 * (ki + 1)) - young - linear - constant
}

/// Smallest admissible value of a monotone-in-the-large constraint by
/// bracketing on `[10⁻⁶, 1]`, doubling the upper end up to `2⁶⁰`, then
/// bisecting. Returns the upper end of the final bracket, which satisfies
/// the constraint.
pub(crate) fn solve_by_bisection(mut slack: impl FnMut(f64) -> f64) -> Result<f64> {
    let mut lo = 1e-6;
    if slack(lo) >= 0.0 {
        return Ok(lo);
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while slack(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(ComparisonError::BracketNotFound);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slack(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest `β` satisfying the space-barrier constraint for `(α, γ)`.
pub fn solve_beta(k: usize, alpha: f64, gamma: f64) -> Result<f64> {
    if k == 0 || !(alpha > 0.0) || !(gamma > 0.0) {
        return Err(ComparisonError::InvalidArgument(format!(
            "solve_beta needs k ≥ 1 and positive alpha, gamma (got k = {k}, alpha = {alpha}, gamma = {gamma})"
        )));
    }
    solve_by_bisection(|b| beta_slack(k, alpha, gamma, b))
}

/// Gradient constant extracted from
/// `b₁A₁a²|∇u|² ≤ α₁r²/(r² − d²)² + 1/t` on `PB_{r/2}`, where
/// `r² − d² ≥ ¾r²`:
/// `|∇u|² ≤ (A₁+1)²a²/A₁ · max(16α₁/9, 1) · (1/r² + 1/t)`, and
/// `√(x + y) ≤ √x + √y` gives `C₁ = (A₁+1)√(max(16α₁/9, 1)/A₁)`.
pub fn ledger_c1(a1: f64, alpha1: f64) -> f64 {
    (a1 + 1.0) * ((16.0 * alpha1 / 9.0).max(1.0) / a1).sqrt()
}

/// Positive root of `B² − nB − ne^{−2} = 0`, from `(B + e^{−2})/B² = 1/n`.
pub fn b_root_first(n: usize) -> f64 {
    let n = n as f64;
    let c = n * (-2.0f64).exp();
    0.5 * (n + (n * n + 4.0 * c).sqrt())
}

/// Positive root of `B² − 2nB − 2(n+4)/ε² = 0`, from
/// `1/B + (1 + 4/n)/(ε²B²) = 1/(2n)`.
pub fn b_root_second(n: usize, epsilon: f64) -> f64 {
    let n = n as f64;
    let c = 2.0 * (n + 4.0) / (epsilon * epsilon);
    n + (n * n + c).sqrt()
}

/// Residuals of both defining equations at their roots.
pub fn b_root_residuals(n: usize, epsilon: f64) -> (f64, f64) {
    let nf = n as f64;
    let b1 = b_root_first(n);
    let b2 = b_root_second(n, epsilon);
    let r1 = (b1 + (-2.0f64).exp()) / (b1 * b1) - 1.0 / nf;
    let r2 = 1.0 / b2 + (1.0 + 4.0 / nf) / (epsilon * epsilon * b2 * b2) - 1.0 / (2.0 * nf);
    (r1, r2)
}

/// Laplacian-bound constant: the larger of the two roots, reading `ε` as `e`.
pub fn solve_b_prop32(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(ComparisonError::InvalidArgument(format!("dimension must be at least 2, got {n}")));
    }
    Ok(b_root_first(n).max(b_root_second(n, E)))
}

/// Barrier coefficient for `Ψ_m` on flat `ℝⁿ` from the radial reduction:
/// with `ρ = d²`, `Δρ = 2n`, `|∇ρ|² = 4ρ`, the inequality
/// `(∂_t − Δ)Ψ ≥ −Ψ²` reduces to `αr² ≥ 4n(R² − ρ) + 24ρ` on `ρ < R²`,
/// with `R = r/2^{m−1}`.
pub fn flat_alpha(n: usize, m: usize) -> f64 {
    let ratio = 0.5f64.powi(m as i32 - 1);
    (4.0 * n as f64).max(24.0) * ratio * ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    RootSolved,
    Derived,
    Calibrated,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::RootSolved => "root-solved",
            Provenance::Derived => "derived",
            Provenance::Calibrated => "calibrated",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Constants attached to the estimate for `∇^m u`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderConstants {
    pub m: usize,
    pub alpha: f64,
    pub alpha_provenance: Provenance,
    /// Bernstein weight `A_m`.
    pub a_weight: f64,
    /// Normaliser `b_m`.
    pub b: f64,
    /// `β_m`, `γ_m` for `m ≥ 2`.
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// Final estimate constant `C_m`.
    pub c: f64,
}

/// The full constant chain for dimension `n` and solution bound `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantLedger {
    pub n: usize,
    pub a: f64,
    pub c_cross: f64,
    /// `orders[m − 1]` holds the constants for `∇^m u`.
    pub orders: Vec<OrderConstants>,
    pub b_first_root: f64,
    pub b_second_root: f64,
    /// Second root with `ε = 1`, the alternate reading of the constraint.
    pub b_second_root_eps1: f64,
    pub b_prop32: f64,
}

/// A failed ledger certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerViolation {
    pub symbol: String,
    pub k: usize,
    pub slack: f64,
}

impl fmt::Display for LedgerViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (k = {}) slack {}", self.symbol, self.k, self.slack)
    }
}

/// One row of the printable ledger table.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub symbol: String,
    pub k: usize,
    pub value: f64,
    pub constraint: String,
    pub slack: f64,
    pub provenance: Provenance,
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= ROOT_TOLERANCE * a.abs().max(b.abs())
}

impl ConstantLedger {
    /// Ledger with `α_m` from the flat radial reduction, orders `1..=k_max`.
    pub fn standard(n: usize, a: f64, k_max: usize) -> Result<Self> {
        let alphas: Vec<(f64, Provenance)> =
            (1..=k_max).map(|m| (flat_alpha(n, m), Provenance::Calibrated)).collect();
        Self::with_alphas(n, a, &alphas)
    }

    /// Ledger with explicit barrier coefficients `α_1, …, α_K`.
    pub fn with_alphas(n: usize, a: f64, alphas: &[(f64, Provenance)]) -> Result<Self> {
        if n < 2 {
            return Err(ComparisonError::InvalidArgument(format!("dimension must be at least 2, got {n}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(ComparisonError::InvalidArgument(format!("a must be positive, got {a}")));
        }
        if alphas.is_empty() || alphas.iter().any(|(v, _)| !(*v > 0.0 && v.is_finite())) {
            return Err(ComparisonError::InvalidArgument("alphas must be positive and nonempty".into()));
        }
        let c_cross = derive_cross_constant();
        let a4 = a.powi(4);
        let mut orders: Vec<OrderConstants> = Vec::with_capacity(alphas.len());
        for (idx, &(alpha, prov)) in alphas.iter().enumerate() {
            let m = idx + 1;
            let oc = if m == 1 {
                let a1 = (c_cross * c_cross / 4.0).max(1.0);
                OrderConstants {
                    m,
                    alpha,
                    alpha_provenance: prov,
                    a_weight: a1,
                    b: 1.0 / ((a1 + 1.0).powi(2) * a4),
                    beta: None,
                    gamma: None,
                    c: ledger_c1(a1, alpha),
                }
            } else {
                let k = m - 1;
                let prev_c = orders[idx - 1].c;
                let weight = (c_cross * c_cross * prev_c * prev_c).max(1.0);
                let gamma = solve_gamma(k)?;
                let beta = solve_beta(k, alpha, gamma)?;
                let spread = weight + 2.0 * prev_c * prev_c;
                let (b, c) = if k == 1 {
                    let b = 1.0 / (spread * spread * a4 * (2.0 + c_cross * c_cross));
                    let bound = (beta * alpha * alpha * (16.0f64 / 3.0).powi(4)).max(gamma);
                    (b, (bound / (b * weight * a4)).sqrt())
                } else {
                    let kf = k as f64;
                    let b = 1.0 / ((c_cross + 2.0 * kf * kf) * spread * spread * a4);
                    let geo = 4f64.powi(m as i32) / 3.0;
                    let bound = (beta * alpha.powi(m as i32) * geo.powi(2 * m as i32)).max(gamma);
                    (b, (2f64.powi(k as i32 - 1) * bound / (b * weight * a4)).sqrt())
                };
                OrderConstants {
                    m,
                    alpha,
                    alpha_provenance: prov,
                    a_weight: weight,
                    b,
                    beta: Some(beta),
                    gamma: Some(gamma),
                    c,
                }
            };
            orders.push(oc);
        }
        let ledger = Self {
            n,
            a,
            c_cross,
            orders,
            b_first_root: b_root_first(n),
            b_second_root: b_root_second(n, E),
            b_second_root_eps1: b_root_second(n, 1.0),
            b_prop32: solve_b_prop32(n)?,
        };
        let violations = ledger.certify();
        if !violations.is_empty() {
            return Err(ComparisonError::Ledger(violations));
        }
        Ok(ledger)
    }

    pub fn k_max(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self, m: usize) -> Option<&OrderConstants> {
        m.checked_sub(1).and_then(|i| self.orders.get(i))
    }

    /// Estimate constant `C_m`.
    pub fn c(&self, m: usize) -> Option<f64> {
        self.order(m).map(|o| o.c)
    }

    /// Every certificate row of the ledger.
    pub fn rows(&self) -> Vec<LedgerRow> {
        let mut rows = Vec::new();
        let a4 = self.a.powi(4);
        let c = self.c_cross;
        let row = |symbol: &str, k: usize, value: f64, constraint: &str, slack: f64, provenance| LedgerRow {
            symbol: symbol.to_string(),
            k,
            value,
            constraint: constraint.to_string(),
            slack,
            provenance,
        };
        let expansion = derive_cross_constant();
        rows.push(row(
            "C_cross",
            0,
            c,
            "C = |cross coefficient| of (∂t−Δ)G1",
            -(c - expansion).abs(),
            Provenance::Derived,
        ));
        for (idx, o) in self.orders.iter().enumerate() {
            let m = o.m;
            rows.push(row("alpha", m, o.alpha, "alpha > 0", o.alpha, o.alpha_provenance));
            if m == 1 {
                rows.push(row("A", 1, o.a_weight, "A1 ≥ C²/4", o.a_weight - c * c / 4.0, Provenance::Derived));
                let expect = 1.0 / ((o.a_weight + 1.0).powi(2) * a4);
                rows.push(row("b", 1, o.b, "b1 = 1/((A1+1)²a⁴)", -(o.b - expect).abs() / expect, Provenance::Derived));
                let expect_c = ledger_c1(o.a_weight, o.alpha);
                rows.push(row(
                    "C",
                    1,
                    o.c,
                    "C1 = (A1+1)√(max(16α1/9,1)/A1)",
                    -(o.c - expect_c).abs() / expect_c,
                    Provenance::Derived,
                ));
                continue;
            }
            let k = m - 1;
            let prev_c = self.orders[idx - 1].c;
            rows.push(row(
                "A",
                m,
                o.a_weight,
                "A ≥ C²·C_prev², A ≥ 1",
                (o.a_weight - c * c * prev_c * prev_c).min(o.a_weight - 1.0),
                Provenance::Derived,
            ));
            if let Some(gamma) = o.gamma {
                let (c1, c0) = gamma_coefficients(k);
                let scale = gamma * gamma + c1 * gamma + c0;
                rows.push(row(
                    "gamma",
                    m,
                    gamma,
                    "γ² ≥ c1·γ + c0",
                    gamma_slack(k, gamma) / scale,
                    Provenance::RootSolved,
                ));
            }
            if let (Some(beta), Some(gamma)) = (o.beta, o.gamma) {
                rows.push(row(
                    "beta",
                    m,
                    beta,
                    "space-barrier constraint on β",
                    beta_slack(k, o.alpha, gamma, beta),
                    Provenance::RootSolved,
                ));
            }
            let spread = o.a_weight + 2.0 * prev_c * prev_c;
            let expect_b = if k == 1 {
                1.0 / (spread * spread * a4 * (2.0 + c * c))
            } else {
                let kf = k as f64;
                1.0 / ((c + 2.0 * kf * kf) * spread * spread * a4)
            };
            let b_rule = if k == 1 { "b2 = 1/((A2+2C1²)²a⁴(2+C²))" } else { "b = 1/((C+2k²)(A+2C_k²)²a⁴)" };
            rows.push(row("b", m, o.b, b_rule, -(o.b - expect_b).abs() / expect_b, Provenance::Derived));
            rows.push(row("C", m, o.c, "extracted from F ≤ Φ on the half ball", o.c, Provenance::Calibrated));
        }
        let (r1, r2) = b_root_residuals(self.n, E);
        let (_, r2_eps1) = b_root_residuals(self.n, 1.0);
        rows.push(row("B_first", 0, self.b_first_root, "(B + e⁻²)/B² = 1/n", -r1.abs(), Provenance::RootSolved));
        rows.push(row(
            "B_second",
            0,
            self.b_second_root,
            "1/B + (1+4/n)/(ε²B²) = 1/(2n), ε = e",
            -r2.abs(),
            Provenance::RootSolved,
        ));
        rows.push(row(
            "B_second_eps1",
            0,
            self.b_second_root_eps1,
            "same with ε = 1",
            -r2_eps1.abs(),
            Provenance::RootSolved,
        ));
        let max_root = self.b_first_root.max(self.b_second_root);
        rows.push(row(
            "B",
            0,
            self.b_prop32,
            "B = max of both roots",
            -(self.b_prop32 - max_root).abs(),
            Provenance::Derived,
        ));
        rows
    }

    /// Failed certificates, empty when every constraint holds. Rows whose
    /// slack must vanish (formulas, roots) tolerate `-10⁻¹²` relative.
    pub fn certify(&self) -> Vec<LedgerViolation> {
        let mut out = Vec::new();
        let c_ok = rel_eq(self.c_cross, derive_cross_constant());
        if !c_ok {
            out.push(LedgerViolation {
                symbol: "C_cross".into(),
                k: 0,
                slack: -(self.c_cross - derive_cross_constant()).abs(),
            });
        }
        for r in self.rows() {
            if r.symbol == "C_cross" {
                continue;
            }
            let ok = match r.symbol.as_str() {
                "alpha" | "A" | "beta" => r.slack >= 0.0 && r.value.is_finite(),
                _ => r.slack >= -ROOT_TOLERANCE && r.value.is_finite() && r.value > 0.0,
            };
            if !ok {
                out.push(LedgerViolation {
                    symbol: r.symbol,
                    k: r.k,
                    slack: r.slack,
                });
            }
        }
        out
    }
}
