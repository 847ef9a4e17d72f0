use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use super::layout::JetLayout;
use crate::error::{Error, Result};

/// Arithmetic operation accepted by [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Truncated multivariate Taylor expansion of a scalar field at a base point.
///
/// The coefficient of the multi-index `α` is `∂^α f / α!` evaluated at the
/// base point. Coefficients are complex; real fields simply carry zero
/// imaginary parts.
///
/// The operator impls (`+`, `-`, `*`) truncate to the smaller of the two
/// orders and panic if the base points differ. Use [`jet_arith`] or the
/// `checked_*` methods for the strict, fallible variants.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<JetLayout>,
    base: Arc<[f64]>,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order())
            .field("base", &&*self.base)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

fn same_base(a: &Arc<[f64]>, b: &Arc<[f64]>) -> bool {
    Arc::ptr_eq(a, b) || a[..] == b[..]
}

impl Jet {
    /// Jet of the constant `value`.
    pub fn constant(base: &Arc<[f64]>, order: usize, value: Complex64) -> Jet {
        let mut jet = Jet::zero(base, order);
        jet.coeffs[0] = value;
        jet
    }

    pub fn zero(base: &Arc<[f64]>, order: usize) -> Jet {
        let layout = JetLayout::get(base.len(), order);
        let coeffs = vec![Complex64::new(0.0, 0.0); layout.len()];
        Jet {
            layout,
            base: base.clone(),
            coeffs,
        }
    }

    /// Jet of the coordinate function `x^(m+1)` (zero-based `m`).
    pub fn coordinate(base: &Arc<[f64]>, order: usize, m: usize) -> Jet {
        let mut jet = Jet::constant(base, order, Complex64::new(base[m], 0.0));
        if order >= 1 {
            let mut e = vec![0u8; base.len()];
            e[m] = 1;
            let idx = jet.layout.index_of(&e).expect("degree-1 index");
            jet.coeffs[idx] = Complex64::new(1.0, 0.0);
        }
        jet
    }

    /// Builds a jet from coefficients listed in layout order.
    pub fn from_coeffs(base: &Arc<[f64]>, order: usize, coeffs: Vec<Complex64>) -> Result<Jet> {
        let layout = JetLayout::get(base.len(), order);
        if coeffs.len() != layout.len() {
            return Err(Error::Invalid(format!(
                "expected {} coefficients for dim {} order {}, got {}",
                layout.len(),
                base.len(),
                order,
                coeffs.len()
            )));
        }
        Ok(Jet {
            layout,
            base: base.clone(),
            coeffs,
        })
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn base_point(&self) -> &Arc<[f64]> {
        &self.base
    }

    /// Constant term, i.e. the value at the base point.
    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Multi-indices matching [`Jet::coeffs`] entry by entry.
    pub fn multi_indices(&self) -> &[Vec<u8>] {
        &self.layout.exponents
    }

    /// Taylor coefficient of a multi-index; zero beyond the stored order.
    pub fn coeff(&self, exponents: &[u8]) -> Complex64 {
        match self.layout.index_of(exponents) {
            Some(i) => self.coeffs[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Partial derivative `∂^α f` at the base point (coefficient times `α!`).
    pub fn derivative(&self, exponents: &[u8]) -> Complex64 {
        let factorial: f64 = exponents
            .iter()
            .map(|&k| (1..=k as u64).product::<u64>() as f64)
            .product();
        self.coeff(exponents) * factorial
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = JetLayout::get(self.dim(), order);
        let coeffs = self.coeffs[..layout.len()].to_vec();
        Jet {
            layout,
            base: self.base.clone(),
            coeffs,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Largest absolute coefficient over all stored degrees.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute imaginary part among the coefficients.
    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: Complex64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Jet {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn conj(&self) -> Jet {
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    fn check_base(&self, other: &Jet) -> Result<()> {
        if self.dim() != other.dim() || !same_base(&self.base, &other.base) {
            return Err(Error::MismatchedJets(format!(
                "base points {:?} and {:?} differ",
                &*self.base, &*other.base
            )));
        }
        Ok(())
    }

    fn check_strict(&self, other: &Jet) -> Result<()> {
        self.check_base(other)?;
        if self.order() != other.order() {
            return Err(Error::MismatchedJets(format!(
                "orders {} and {} differ",
                self.order(),
                other.order()
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(Complex64, Complex64) -> Complex64) -> Jet {
        let order = self.order().min(other.order());
        let layout = JetLayout::get(self.dim(), order);
        let coeffs = self.coeffs[..layout.len()]
            .iter()
            .zip(&other.coeffs[..layout.len()])
            .map(|(&a, &b)| f(a, b))
            .collect();
        Jet {
            layout,
            base: self.base.clone(),
            coeffs,
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        let order = self.order().min(other.order());
        let layout = JetLayout::get(self.dim(), order);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); layout.len()];
        for &(i, j, k) in &layout.products {
            let a = self.coeffs[i as usize];
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            coeffs[k as usize] += a * other.coeffs[j as usize];
        }
        Jet {
            layout,
            base: self.base.clone(),
            coeffs,
        }
    }

    pub fn checked_add(&self, other: &Jet) -> Result<Jet> {
        self.check_strict(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn checked_sub(&self, other: &Jet) -> Result<Jet> {
        self.check_strict(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn checked_mul(&self, other: &Jet) -> Result<Jet> {
        self.check_strict(other)?;
        Ok(self.product(other))
    }

    pub fn checked_div(&self, other: &Jet) -> Result<Jet> {
        self.check_strict(other)?;
        Ok(self.product(&other.recip()?))
    }

    /// Multiplicative inverse by Newton iteration `r ← r (2 − a r)`.
    ///
    /// Each step doubles the number of correct degrees, so
    /// `ceil(log2(order + 1))` steps suffice.
    pub fn recip(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0.norm() == 0.0 || !a0.is_finite() {
            return Err(Error::SingularEvaluation(format!(
                "reciprocal of a jet with constant term {a0}"
            )));
        }
        let order = self.order();
        let mut r = Jet::constant(&self.base, order, a0.inv());
        let two = Jet::constant(&self.base, order, Complex64::new(2.0, 0.0));
        let mut correct = 1usize;
        while correct < order + 1 {
            let ar = self.product(&r);
            r = r.product(&two.zip_with(&ar, |x, y| x - y));
            correct *= 2;
        }
        Ok(r)
    }

    /// `Σ_k weights[k] · (self − a0)^k`, the Taylor composition used by the
    /// analytic functions.
    fn compose(&self, weights: &[Complex64]) -> Jet {
        let order = self.order();
        let mut h = self.clone();
        h.coeffs[0] = Complex64::new(0.0, 0.0);
        let mut acc = Jet::constant(&self.base, order, weights[0]);
        let mut power = Jet::constant(&self.base, order, Complex64::new(1.0, 0.0));
        for w in weights.iter().skip(1) {
            power = power.product(&h);
            acc = acc.zip_with(&power, |a, p| a + w * p);
        }
        acc
    }

    fn check_principal_domain(&self, name: &str) -> Result<Complex64> {
        let a0 = self.value();
        let on_cut = a0.im.abs() <= 1e-14 * a0.norm().max(1.0) && a0.re <= 0.0;
        if on_cut || !a0.is_finite() {
            return Err(Error::SingularEvaluation(format!("{name} of {a0}")));
        }
        Ok(a0)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a0 = self.check_principal_domain("sqrt")?;
        let root = a0.sqrt();
        // binomial(1/2, k) a0^(1/2 - k)
        let mut weights = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        let mut pow = root;
        for k in 0..=self.order() {
            weights.push(pow * binom);
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
            pow /= a0;
        }
        Ok(self.compose(&weights))
    }

    pub fn ln(&self) -> Result<Jet> {
        let a0 = self.check_principal_domain("log")?;
        let mut weights = vec![a0.ln()];
        let mut inv = Complex64::new(1.0, 0.0);
        for k in 1..=self.order() {
            inv /= a0;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            weights.push(inv * (sign / k as f64));
        }
        Ok(self.compose(&weights))
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.value().exp();
        let mut weights = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            weights.push(e0 / fact);
        }
        self.compose(&weights)
    }

    /// Integer power; negative exponents go through [`Jet::recip`].
    pub fn powi(&self, n: i32) -> Result<Jet> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let mut k = n.unsigned_abs();
        let mut acc = Jet::constant(&self.base, self.order(), Complex64::new(1.0, 0.0));
        let mut sq = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.product(&sq);
            }
            k >>= 1;
            if k > 0 {
                sq = sq.product(&sq);
            }
        }
        Ok(acc)
    }

    /// `∂_m` of the jet; the result has order reduced by one.
    pub fn partial(&self, m: usize) -> Result<Jet> {
        if self.order() == 0 {
            return Err(Error::OrderExhausted);
        }
        let layout = JetLayout::get(self.dim(), self.order() - 1);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); layout.len()];
        for &(src, dst, factor) in &self.layout.partials[m] {
            coeffs[dst as usize] += self.coeffs[src as usize] * factor;
        }
        Ok(Jet {
            layout,
            base: self.base.clone(),
            coeffs,
        })
    }
}

/// Strict jet arithmetic: base points and orders must agree.
pub fn jet_arith(a: &Jet, b: &Jet, op: JetOp) -> Result<Jet> {
    match op {
        JetOp::Add => a.checked_add(b),
        JetOp::Sub => a.checked_sub(b),
        JetOp::Mul => a.checked_mul(b),
        JetOp::Div => a.checked_div(b),
    }
}

/// `∂_m a`, one order lower.
pub fn jet_partial(a: &Jet, m: usize) -> Result<Jet> {
    a.partial(m)
}

fn expect_base(a: &Jet, b: &Jet) {
    if let Err(e) = a.check_base(b) {
        panic!("{e}");
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        expect_base(self, rhs);
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        expect_base(self, rhs);
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        expect_base(self, rhs);
        self.product(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_real(-1.0)
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { (&self).$m(&rhs) }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet { (&self).$m(rhs) }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { self.$m(&rhs) }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn base1(x: f64) -> Arc<[f64]> {
        Arc::from(vec![x])
    }

    #[test]
    fn truncated_product_drops_high_degree() {
        let b = base1(0.0);
        let t = Jet::coordinate(&b, 1, 0);
        let one = Jet::constant(&b, 1, c(1.0));
        let p = (&one + &t) * (&one - &t);
        assert_eq!(p.coeffs(), &[c(1.0), c(0.0)]);
    }

    #[test]
    fn self_division_is_unit() {
        let b: Arc<[f64]> = Arc::from(vec![0.3, -0.2]);
        let x = Jet::coordinate(&b, 4, 0);
        let y = Jet::coordinate(&b, 4, 1);
        let a = &(&x * &y) + &Jet::constant(&b, 4, c(2.0));
        let q = a.checked_div(&a).unwrap();
        assert!((q.value() - c(1.0)).norm() < 1e-15);
        assert!(q.coeffs()[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn recip_of_zero_constant_is_singular() {
        let b = base1(0.0);
        let x = Jet::coordinate(&b, 2, 0);
        assert!(matches!(x.recip(), Err(Error::SingularEvaluation(_))));
    }

    #[test]
    fn strict_arith_rejects_mismatch() {
        let a = Jet::constant(&base1(0.0), 2, c(1.0));
        let b = Jet::constant(&base1(1.0), 2, c(1.0));
        let d = Jet::constant(&base1(0.0), 1, c(1.0));
        assert!(matches!(
            jet_arith(&a, &b, JetOp::Add),
            Err(Error::MismatchedJets(_))
        ));
        assert!(matches!(
            jet_arith(&a, &d, JetOp::Mul),
            Err(Error::MismatchedJets(_))
        ));
    }

    #[test]
    fn partial_of_order_zero_is_exhausted() {
        let a = Jet::constant(&base1(0.0), 0, c(1.0));
        assert_eq!(a.partial(0).unwrap_err(), Error::OrderExhausted);
    }

    #[test]
    fn analytic_functions_match_known_series() {
        // exp(x) at 0: 1/k!
        let b = base1(0.0);
        let x = Jet::coordinate(&b, 4, 0);
        let e = x.exp();
        let want = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
        for (got, w) in e.coeffs().iter().zip(want) {
            assert!((got - c(w)).norm() < 1e-15);
        }
        // log(1 + x): (-1)^(k+1)/k
        let one = Jet::constant(&b, 4, c(1.0));
        let l = (&one + &x).ln().unwrap();
        let want = [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25];
        for (got, w) in l.coeffs().iter().zip(want) {
            assert!((got - c(w)).norm() < 1e-15);
        }
        // sqrt(1 + x)^2 = 1 + x
        let s = (&one + &x).sqrt().unwrap();
        let sq = &s * &s;
        assert!((sq.coeffs()[1] - c(1.0)).norm() < 1e-15);
        assert!(sq.coeffs()[2..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn negative_powers_invert() {
        let b = base1(0.7);
        let x = Jet::coordinate(&b, 3, 0);
        let p = x.powi(-3).unwrap() * x.powi(3).unwrap();
        assert!((p.value() - c(1.0)).norm() < 1e-14);
        assert!(p.coeffs()[1..].iter().all(|z| z.norm() < 1e-13));
    }
}
