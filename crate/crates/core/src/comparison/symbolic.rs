//! A small product-rule expander for heat operators of Bernstein quantities.
//!
//! Expressions are polynomials in a handful of scalar atoms built from a
//! solution `u` of the coupled heat equation. The expander knows
//! `L = ∂_t − Δ` on each atom and the gradient pairing of each pair of
//! atoms, and applies `L(fg) = f·Lg + g·Lf − 2⟨∇f, ∇g⟩` to products.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// The constant `A₁a²`.
    K,
    /// `u²`
    U,
    /// `|∇u|²`
    P,
    /// `|∇²u|²`
    H,
    /// `u ∇²u(∇u, ∇u)`
    X,
}

impl Atom {
    fn symbol(self) -> &'static str {
        match self {
            Atom::K => "K",
            Atom::U => "u²",
            Atom::P => "|∇u|²",
            Atom::H => "|∇²u|²",
            Atom::X => "u∇²u(∇u,∇u)",
        }
    }
}

/// Polynomial in atoms with real coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<Vec<Atom>, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, &[])
    }

    pub fn atom(a: Atom) -> Self {
        Self::monomial(1.0, &[a])
    }

    pub fn monomial(c: f64, atoms: &[Atom]) -> Self {
        let mut p = Self::zero();
        p.add_term(atoms.to_vec(), c);
        p
    }

    fn add_term(&mut self, mut atoms: Vec<Atom>, c: f64) {
        if c == 0.0 {
            return;
        }
        atoms.sort();
        let entry = self.terms.entry(atoms).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                out.add_term(m, ca * cb);
            }
        }
        out
    }

    /// Coefficient of the monomial with exactly these atoms.
    pub fn coefficient(&self, atoms: &[Atom]) -> f64 {
        let mut key = atoms.to_vec();
        key.sort();
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Atom], f64)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), *c))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(if *c < 0.0 { " - " } else { " + " })?;
            } else if *c < 0.0 {
                f.write_str("-")?;
            }
            write!(f, "{}", c.abs())?;
            for a in m {
                write!(f, "·{}", a.symbol())?;
            }
        }
        Ok(())
    }
}

/// `L = ∂_t − Δ` on single atoms, for `u` solving the heat equation along
/// Ricci flow.
fn heat_operator_atom(a: Atom) -> Option<Poly> {
    match a {
        Atom::K => Some(Poly::zero()),
        // L(u²) = 2u·Lu − 2|∇u|²
        Atom::U => Some(Poly::monomial(-2.0, &[Atom::P])),
        // L|∇u|² = −2|∇²u|²
        Atom::P => Some(Poly::monomial(-2.0, &[Atom::H])),
        Atom::H | Atom::X => None,
    }
}

/// `⟨∇a, ∇b⟩` for pairs of atoms.
fn pairing(a: Atom, b: Atom) -> Option<Poly> {
    use Atom::*;
    match (a.min(b), a.max(b)) {
        (K, _) => Some(Poly::zero()),
        // ⟨∇u², ∇u²⟩ = 4u²|∇u|²
        (U, U) => Some(Poly::monomial(4.0, &[U, P])),
        // ⟨2u∇u, 2∇²u(∇u, ·)⟩ = 4u∇²u(∇u, ∇u)
        (U, P) => Some(Poly::monomial(4.0, &[X])),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownRule(pub String);

fn heat_operator_monomial(atoms: &[Atom]) -> Result<Poly, UnknownRule> {
    match atoms {
        [] => Ok(Poly::zero()),
        [a] => heat_operator_atom(*a).ok_or_else(|| UnknownRule(format!("L({})", a.symbol()))),
        [first, rest @ ..] => {
            let f = Poly::atom(*first);
            let g = Poly::monomial(1.0, rest);
            let lf = heat_operator_monomial(&[*first])?;
            let lg = heat_operator_monomial(rest)?;
            let cross = gradient_pairing(&[*first], rest)?;
            Ok(f.mul(&lg).add(&g.mul(&lf)).add(&cross.scale(-2.0)))
        }
    }
}

/// `⟨∇(Πa), ∇(Πb)⟩` by the Leibniz rule on both sides.
fn gradient_pairing(a: &[Atom], b: &[Atom]) -> Result<Poly, UnknownRule> {
    let mut out = Poly::zero();
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let inner = pairing(x, y)
                .ok_or_else(|| UnknownRule(format!("<∇{}, ∇{}>", x.symbol(), y.symbol())))?;
            let mut rest: Vec<Atom> = a.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &v)| v).collect();
            rest.extend(b.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v));
            out = out.add(&inner.mul(&Poly::monomial(1.0, &rest)));
        }
    }
    Ok(out)
}

/// Applies `∂_t − Δ` to a polynomial.
pub fn heat_operator(p: &Poly) -> Result<Poly, UnknownRule> {
    let mut out = Poly::zero();
    for (m, c) in p.terms() {
        out = out.add(&heat_operator_monomial(m)?.scale(c));
    }
    Ok(out)
}

/// `(∂_t − Δ)G₁` for `G₁ = (A₁a² + u²)|∇u|²`.
pub fn first_bernstein_expansion() -> Poly {
    let g1 = Poly::atom(Atom::K).add(&Poly::atom(Atom::U)).mul(&Poly::atom(Atom::P));
    heat_operator(&g1).expect("rules cover G₁")
}

/// Constant `C` in `|u ∇u∗∇u∗∇²u| ≤ C a |∇u|²|∇²u|`.
///
/// The cross term of the expansion is `c·u∇²u(∇u, ∇u)`, and
/// `|u∇²u(∇u, ∇u)| ≤ a|∇u|²|∇²u|` by Cauchy–Schwarz when `|u| ≤ a`, so
/// `C = |c|`.
pub fn derive_cross_constant() -> f64 {
    first_bernstein_expansion().coefficient(&[Atom::X]).abs()
}
