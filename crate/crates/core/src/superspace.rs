//! Graded phase-space algebra.
//!
//! A [`SuperElement`] is a polynomial in the commuting momenta `Π_M` and the
//! anticommuting flat-frame generators `ψ^A`, with [`Jet`] coefficients in the
//! coordinates. The bracket is fixed by
//!
//! ```text
//! {Π_M, x^N} = δ_M^N,   {ψ^A, ψ^B} = i δ^AB,   {Π, ψ} = {x, ψ} = 0
//! ```
//!
//! and extended with right Grassmann derivatives on the left argument and left
//! derivatives on the right argument:
//!
//! ```text
//! {a, b} = Σ_M (∂a/∂Π_M)(∂_M b) − (∂_M a)(∂b/∂Π_M) + i Σ_A (a ∂⃖/∂ψ^A)(∂⃗/∂ψ^A b)
//! ```
//!
//! Curved fermions `ψ^M = e^M_A(x) ψ^A` are ordinary composite elements, which
//! reproduces `{ψ^M, ψ^N} = i g^MN`.
//!
//! # Debug serialization
//!
//! [`SuperElement::debug_string`] prints one term per line, sorted by momentum
//! degree, momentum indices, Grassmann degree and Grassmann indices (all
//! one-based), with the constant term of the coefficient jet:
//!
//! ```text
//! (1.000000000000e0 + 0.000000000000e0i) * Pi_1 * psi[1]
//! (0.000000000000e0 - 5.000000000000e-1i) * psi[1,3,4]
//! ```
//!
//! A term without momenta or fermions prints the coefficient alone; the zero
//! element prints `0`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jets::Jet;

/// Highest momentum degree an element may carry. In-scope supercharges have
/// degree 1 and Hamiltonians degree 2; nested brackets in property tests
/// reach 3.
pub const MAX_MOMENTUM_DEGREE: usize = 4;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Product of momenta `Π_1^k1 Π_2^k2 ...`, four bits per coordinate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Momenta(u64);

impl Momenta {
    pub const ONE: Momenta = Momenta(0);

    pub fn single(m: usize) -> Momenta {
        Momenta(1 << (4 * m))
    }

    pub fn from_indices(indices: &[usize]) -> Momenta {
        indices
            .iter()
            .fold(Momenta::ONE, |acc, &m| acc.times(Momenta::single(m)))
    }

    pub fn exponent(self, m: usize) -> u32 {
        ((self.0 >> (4 * m)) & 0xf) as u32
    }

    pub fn degree(self) -> usize {
        (0..16).map(|m| self.exponent(m) as usize).sum()
    }

    pub fn times(self, other: Momenta) -> Momenta {
        Momenta(self.0 + other.0)
    }

    /// Removes one factor `Π_m`, if present.
    pub fn lower(self, m: usize) -> Option<Momenta> {
        (self.exponent(m) > 0).then(|| Momenta(self.0 - (1 << (4 * m))))
    }

    /// Zero-based indices with repetition, ascending.
    pub fn indices(self) -> Vec<usize> {
        (0..16)
            .flat_map(|m| std::iter::repeat_n(m, self.exponent(m) as usize))
            .collect()
    }
}

/// Canonically ordered product `ψ^{A1} ψ^{A2} ...` with `A1 < A2 < ...`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GrassmannMonomial(u32);

impl GrassmannMonomial {
    pub const ONE: GrassmannMonomial = GrassmannMonomial(0);

    pub fn generator(a: usize) -> GrassmannMonomial {
        GrassmannMonomial(1 << a)
    }

    /// Canonical form of an unordered product with its permutation sign, or
    /// `None` when a generator repeats.
    pub fn from_factors(factors: &[usize]) -> Option<(GrassmannMonomial, f64)> {
        factors
            .iter()
            .try_fold((Self::ONE, 1.0), |(acc, sign), &a| {
                let (m, s) = acc.times(Self::generator(a))?;
                Some((m, sign * s))
            })
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, a: usize) -> bool {
        self.0 & (1 << a) != 0
    }

    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|&a| self.contains(a)).collect()
    }

    /// `self · other` reordered canonically, with the sign of the reordering.
    pub fn times(self, other: GrassmannMonomial) -> Option<(GrassmannMonomial, f64)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        // every generator of `other` passes the generators of `self` above it
        let mut swaps = 0;
        let mut rest = other.0;
        while rest != 0 {
            let b = rest.trailing_zeros();
            swaps += (self.0 >> b).count_ones();
            rest &= rest - 1;
        }
        let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
        Some((GrassmannMonomial(self.0 | other.0), sign))
    }

    /// Right derivative by `ψ^a`: the generator is moved to the right end.
    fn right_derivative(self, a: usize) -> Option<(GrassmannMonomial, f64)> {
        if !self.contains(a) {
            return None;
        }
        let after = (self.0 >> (a + 1)).count_ones();
        let sign = if after % 2 == 0 { 1.0 } else { -1.0 };
        Some((GrassmannMonomial(self.0 & !(1 << a)), sign))
    }

    /// Left derivative by `ψ^a`: the generator is moved to the left end.
    fn left_derivative(self, a: usize) -> Option<(GrassmannMonomial, f64)> {
        if !self.contains(a) {
            return None;
        }
        let before = (self.0 & ((1 << a) - 1)).count_ones();
        let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
        Some((GrassmannMonomial(self.0 & !(1 << a)), sign))
    }
}

/// Grassmann parity of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    /// `(-1)^{|a||b|}` for homogeneous parities.
    pub fn exchange_sign(self, other: Parity) -> f64 {
        if self == Parity::Odd && other == Parity::Odd {
            -1.0
        } else {
            1.0
        }
    }
}

type TermKey = (Momenta, GrassmannMonomial);

/// Polynomial in momenta and flat-frame fermions with jet coefficients.
#[derive(Clone, Debug)]
pub struct SuperElement {
    dim: usize,
    fermions: usize,
    order: usize,
    base: Arc<[f64]>,
    terms: BTreeMap<TermKey, Jet>,
}

impl SuperElement {
    /// The zero element over `dim` coordinates and `fermions` generators.
    pub fn zero(base: &Arc<[f64]>, order: usize, fermions: usize) -> SuperElement {
        assert!(base.len() <= 16, "at most 16 coordinates are supported");
        assert!(
            fermions <= 32,
            "at most 32 fermion generators are supported"
        );
        SuperElement {
            dim: base.len(),
            fermions,
            order,
            base: base.clone(),
            terms: BTreeMap::new(),
        }
    }

    /// Element consisting of one term `coeff · Π^momenta · ψ^{factors...}`,
    /// with the factors given in any order.
    pub fn term(
        coeff: Jet,
        fermions: usize,
        momenta: Momenta,
        factors: &[usize],
    ) -> Result<SuperElement> {
        let mut e = SuperElement::zero(coeff.base_point(), coeff.order(), fermions);
        e.add_term(coeff, momenta, factors)?;
        Ok(e)
    }

    /// Scalar function of the coordinates.
    pub fn scalar(coeff: Jet, fermions: usize) -> SuperElement {
        SuperElement::term(coeff, fermions, Momenta::ONE, &[]).expect("scalar term")
    }

    /// The momentum `Π_m` (zero-based `m`).
    pub fn momentum(base: &Arc<[f64]>, order: usize, fermions: usize, m: usize) -> SuperElement {
        let one = Jet::constant(base, order, Complex64::new(1.0, 0.0));
        SuperElement::term(one, fermions, Momenta::single(m), &[]).expect("momentum term")
    }

    /// The flat-frame generator `ψ^a` (zero-based `a`).
    pub fn fermion(base: &Arc<[f64]>, order: usize, fermions: usize, a: usize) -> SuperElement {
        let one = Jet::constant(base, order, Complex64::new(1.0, 0.0));
        SuperElement::term(one, fermions, Momenta::ONE, &[a]).expect("fermion term")
    }

    /// Adds `coeff · Π^momenta · ψ^{factors...}`; the factors are reordered
    /// canonically with the permutation sign, repeated factors give zero.
    pub fn add_term(&mut self, coeff: Jet, momenta: Momenta, factors: &[usize]) -> Result<()> {
        if let Some(&bad) = factors.iter().find(|&&a| a >= self.fermions) {
            return Err(Error::Invalid(format!(
                "fermion index {bad} outside {} generators",
                self.fermions
            )));
        }
        if momenta.degree() > MAX_MOMENTUM_DEGREE {
            return Err(Error::MomentumDegree(momenta.degree()));
        }
        self.check_coeff(&coeff)?;
        let Some((mono, sign)) = GrassmannMonomial::from_factors(factors) else {
            return Ok(());
        };
        let coeff = coeff.truncate(self.order);
        let coeff = if sign < 0.0 { -coeff } else { coeff };
        self.accumulate((momenta, mono), coeff);
        Ok(())
    }

    fn check_coeff(&self, coeff: &Jet) -> Result<()> {
        let base = coeff.base_point();
        if coeff.dim() != self.dim || !(Arc::ptr_eq(base, &self.base) || base[..] == self.base[..])
        {
            return Err(Error::MismatchedJets(
                "coefficient base point differs from the element's".into(),
            ));
        }
        if coeff.order() < self.order {
            return Err(Error::MismatchedJets(format!(
                "coefficient of order {} in an element of order {}",
                coeff.order(),
                self.order
            )));
        }
        Ok(())
    }

    fn accumulate(&mut self, key: TermKey, coeff: Jet) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(v) => {
                if !coeff.is_zero() {
                    v.insert(coeff);
                }
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + &coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    o.insert(sum);
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fermions(&self) -> usize {
        self.fermions
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn base_point(&self) -> &Arc<[f64]> {
        &self.base
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterates `(momenta, monomial, coefficient)` in storage order.
    pub fn terms(&self) -> impl Iterator<Item = (Momenta, GrassmannMonomial, &Jet)> {
        self.terms.iter().map(|(&(m, g), c)| (m, g, c))
    }

    /// Coefficient of a given term, if present.
    pub fn coefficient(&self, momenta: Momenta, mono: GrassmannMonomial) -> Option<&Jet> {
        self.terms.get(&(momenta, mono))
    }

    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for &(_, g) in self.terms.keys() {
            if g.degree() % 2 == 0 {
                even = true;
            } else {
                odd = true;
            }
        }
        match (even, odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Mixed,
        }
    }

    pub fn momentum_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|(m, _)| m.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn grassmann_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|(_, g)| g.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn min_grassmann_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|(_, g)| g.degree())
            .min()
            .unwrap_or(0)
    }

    /// Restriction to the terms of one Grassmann degree.
    pub fn grassmann_component(&self, degree: usize) -> SuperElement {
        let mut out = self.empty_like(self.order);
        for (&k, c) in &self.terms {
            if k.1.degree() == degree {
                out.terms.insert(k, c.clone());
            }
        }
        out
    }

    /// Restriction to the terms of one momentum degree.
    pub fn momentum_component(&self, degree: usize) -> SuperElement {
        let mut out = self.empty_like(self.order);
        for (&k, c) in &self.terms {
            if k.0.degree() == degree {
                out.terms.insert(k, c.clone());
            }
        }
        out
    }

    fn empty_like(&self, order: usize) -> SuperElement {
        SuperElement {
            dim: self.dim,
            fermions: self.fermions,
            order,
            base: self.base.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn truncate(&self, order: usize) -> SuperElement {
        if order >= self.order {
            return self.clone();
        }
        let mut out = self.empty_like(order);
        for (&k, c) in &self.terms {
            let t = c.truncate(order);
            if !t.is_zero() {
                out.terms.insert(k, t);
            }
        }
        out
    }

    fn check_compatible(&self, other: &SuperElement) -> Result<()> {
        if self.dim != other.dim
            || self.fermions != other.fermions
            || !(Arc::ptr_eq(&self.base, &other.base) || self.base[..] == other.base[..])
        {
            return Err(Error::MismatchedJets(format!(
                "elements over ({} coords, {} fermions, {:?}) and ({} coords, {} fermions, {:?})",
                self.dim, self.fermions, &*self.base, other.dim, other.fermions, &*other.base
            )));
        }
        Ok(())
    }

    fn combine(&self, other: &SuperElement, sign: f64) -> Result<SuperElement> {
        self.check_compatible(other)?;
        let order = self.order.min(other.order);
        let mut out = self.truncate(order);
        for (&k, c) in &other.terms {
            let c = c.truncate(order);
            out.accumulate(k, if sign < 0.0 { -c } else { c });
        }
        Ok(out)
    }

    /// Sum; the result has the smaller of the two orders.
    pub fn try_add(&self, other: &SuperElement) -> Result<SuperElement> {
        self.combine(other, 1.0)
    }

    /// Difference; the result has the smaller of the two orders.
    pub fn try_sub(&self, other: &SuperElement) -> Result<SuperElement> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, factor: Complex64) -> SuperElement {
        let mut out = self.empty_like(self.order);
        if factor.norm() == 0.0 {
            return out;
        }
        for (&k, c) in &self.terms {
            out.terms.insert(k, c.scale(factor));
        }
        out
    }

    /// Multiplies every coefficient by a scalar jet.
    pub fn mul_scalar(&self, f: &Jet) -> Result<SuperElement> {
        let order = self.order.min(f.order());
        let mut out = self.empty_like(order);
        for (&k, c) in &self.terms {
            out.accumulate(k, c * f);
        }
        Ok(out)
    }

    /// Graded product. Base points and jet orders must match.
    pub fn try_mul(&self, other: &SuperElement) -> Result<SuperElement> {
        self.check_compatible(other)?;
        if self.order != other.order {
            return Err(Error::MismatchedJets(format!(
                "orders {} and {} differ",
                self.order, other.order
            )));
        }
        let mut out = self.empty_like(self.order);
        for (&(m1, g1), c1) in &self.terms {
            for (&(m2, g2), c2) in &other.terms {
                let Some((g, sign)) = g1.times(g2) else {
                    continue;
                };
                let m = m1.times(m2);
                if m.degree() > MAX_MOMENTUM_DEGREE {
                    return Err(Error::MomentumDegree(m.degree()));
                }
                let c = c1 * c2;
                out.accumulate((m, g), if sign < 0.0 { -c } else { c });
            }
        }
        Ok(out)
    }

    /// Graded Poisson bracket; the result is one jet order lower.
    pub fn bracket(&self, other: &SuperElement) -> Result<SuperElement> {
        self.check_compatible(other)?;
        let order = self.order.min(other.order);
        if order == 0 {
            return Err(Error::OrderExhausted);
        }
        let out_order = order - 1;
        let mut out = self.empty_like(out_order);

        let lhs: Vec<_> = self
            .terms
            .iter()
            .map(|(&k, c)| Ok((k, c.truncate(out_order), derivatives(c, self.dim)?)))
            .collect::<Result<_>>()?;
        let rhs: Vec<_> = other
            .terms
            .iter()
            .map(|(&k, c)| Ok((k, c.truncate(out_order), derivatives(c, self.dim)?)))
            .collect::<Result<_>>()?;

        for ((m1, g1), c1, d1) in &lhs {
            for ((m2, g2), c2, d2) in &rhs {
                let product = g1.times(*g2);
                // bosonic part
                if let Some((g, sign)) = product {
                    for m in 0..self.dim {
                        if let Some(rest) = m1.lower(m) {
                            let k = m1.exponent(m) as f64 * sign;
                            let mono = rest.times(*m2);
                            push(&mut out, (mono, g), (c1 * &d2[m]).scale_real(k))?;
                        }
                        if let Some(rest) = m2.lower(m) {
                            let k = -(m2.exponent(m) as f64) * sign;
                            let mono = m1.times(rest);
                            push(&mut out, (mono, g), (&d1[m] * c2).scale_real(k))?;
                        }
                    }
                }
                // fermionic part
                let shared = g1.0 & g2.0;
                let mut rest = shared;
                while rest != 0 {
                    let a = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    let (h1, s1) = g1.right_derivative(a).expect("generator present");
                    let (h2, s2) = g2.left_derivative(a).expect("generator present");
                    let Some((g, s3)) = h1.times(h2) else {
                        continue;
                    };
                    let coeff = (c1 * c2).scale(I * (s1 * s2 * s3));
                    push(&mut out, (m1.times(*m2), g), coeff)?;
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute constant-term coefficient; zero iff the element
    /// vanishes at the base point.
    pub fn residual_norm(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.value().norm())
            .fold(0.0, f64::max)
    }

    /// Largest absolute coefficient over every stored jet degree.
    pub fn jet_norm(&self) -> f64 {
        self.terms.values().map(Jet::max_abs).fold(0.0, f64::max)
    }

    /// Deviation from reality under Grassmann conjugation.
    ///
    /// Conjugation reverses fermion order, so a degree-`k` monomial picks up
    /// `(-1)^{k(k-1)/2}`; a real element has coefficients
    /// `i^{k(k-1)/2} × real`. Returns the largest imaginary part left after
    /// removing that phase from the constant terms.
    pub fn reality_residual(&self) -> f64 {
        self.terms
            .iter()
            .map(|(&(_, g), c)| {
                let k = g.degree();
                let phase = I.powi(-((k * (k.saturating_sub(1)) / 2) as i32));
                (c.value() * phase).im.abs()
            })
            .fold(0.0, f64::max)
    }

    /// Term list in the documented debug format.
    pub fn debug_string(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut rows: Vec<_> = self.terms.iter().collect();
        rows.sort_by_key(|(&(m, g), _)| (m.degree(), m.indices(), g.degree(), g.indices()));
        let lines: Vec<String> = rows
            .into_iter()
            .map(|(&(m, g), c)| {
                let v = c.value();
                let mut s = format!(
                    "({:.12e} {} {:.12e}i)",
                    v.re,
                    if v.im < 0.0 { '-' } else { '+' },
                    v.im.abs()
                );
                for idx in m.indices() {
                    s.push_str(&format!(" * Pi_{}", idx + 1));
                }
                if g.degree() > 0 {
                    let list: Vec<String> =
                        g.indices().iter().map(|a| (a + 1).to_string()).collect();
                    s.push_str(&format!(" * psi[{}]", list.join(",")));
                }
                s
            })
            .collect();
        lines.join("\n")
    }
}

fn derivatives(c: &Jet, dim: usize) -> Result<Vec<Jet>> {
    (0..dim).map(|m| c.partial(m)).collect()
}

fn push(out: &mut SuperElement, key: TermKey, coeff: Jet) -> Result<()> {
    if key.0.degree() > MAX_MOMENTUM_DEGREE {
        return Err(Error::MomentumDegree(key.0.degree()));
    }
    out.accumulate(key, coeff.truncate(out.order));
    Ok(())
}

impl fmt::Display for SuperElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.debug_string())
    }
}

/// `a · b`, see [`SuperElement::try_mul`].
pub fn super_mul(a: &SuperElement, b: &SuperElement) -> Result<SuperElement> {
    a.try_mul(b)
}

/// `{a, b}`, see [`SuperElement::bracket`].
pub fn graded_poisson_bracket(a: &SuperElement, b: &SuperElement) -> Result<SuperElement> {
    a.bracket(b)
}

/// Largest constant-term coefficient magnitude of `a`.
pub fn residual_norm(a: &SuperElement) -> f64 {
    a.residual_norm()
}
