use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::jet::Jet;
use crate::error::{Error, Result};

/// A variable a [`FieldExpr`] can depend on.
///
/// Coordinates are zero-based internally (`X(0)` prints as `x1`). The complex
/// variables follow the pairing `z_j = (x_{2j-1} - i x_{2j}) / √2` on
/// consecutive real coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(usize),
    Z(usize),
    Zbar(usize),
}

impl Var {
    /// Largest real coordinate (one-based count) this variable touches.
    pub fn coordinate_extent(self) -> usize {
        match self {
            Var::X(m) => m + 1,
            Var::Z(j) | Var::Zbar(j) => 2 * j + 2,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(m) => write!(f, "x{}", m + 1),
            Var::Z(j) => write!(f, "z{}", j + 1),
            Var::Zbar(j) => write!(f, "zb{}", j + 1),
        }
    }
}

/// Scalar field expression over the chart coordinates.
///
/// Built by [`FieldExpr::parse`] or the smart constructors, which fold the
/// trivial cases (`0 + e`, `1 * e`, ...) so that symbolic derivatives stay small.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpr {
    Const(Complex64),
    Var(Var),
    Add(Arc<FieldExpr>, Arc<FieldExpr>),
    Sub(Arc<FieldExpr>, Arc<FieldExpr>),
    Mul(Arc<FieldExpr>, Arc<FieldExpr>),
    Div(Arc<FieldExpr>, Arc<FieldExpr>),
    Neg(Arc<FieldExpr>),
    Pow(Arc<FieldExpr>, i32),
    Sqrt(Arc<FieldExpr>),
    Log(Arc<FieldExpr>),
    Exp(Arc<FieldExpr>),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl FieldExpr {
    pub fn parse(src: &str) -> Result<FieldExpr> {
        super::parse::parse_expr(src)
    }

    pub fn real(v: f64) -> FieldExpr {
        FieldExpr::Const(Complex64::new(v, 0.0))
    }

    pub fn complex(v: Complex64) -> FieldExpr {
        FieldExpr::Const(v)
    }

    /// Zero-based real coordinate.
    pub fn x(m: usize) -> FieldExpr {
        FieldExpr::Var(Var::X(m))
    }

    pub fn z(j: usize) -> FieldExpr {
        FieldExpr::Var(Var::Z(j))
    }

    pub fn zbar(j: usize) -> FieldExpr {
        FieldExpr::Var(Var::Zbar(j))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self {
            FieldExpr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(ZERO)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(ONE)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => FieldExpr::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => FieldExpr::Add(Arc::new(a), Arc::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => FieldExpr::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => FieldExpr::neg(b),
            _ => FieldExpr::Sub(Arc::new(a), Arc::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => FieldExpr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => FieldExpr::Const(ZERO),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => FieldExpr::Mul(Arc::new(a), Arc::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != ZERO => FieldExpr::Const(x / y),
            _ if a.is_zero() && !b.is_zero() => FieldExpr::Const(ZERO),
            _ if b.is_one() => a,
            _ => FieldExpr::Div(Arc::new(a), Arc::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: FieldExpr) -> FieldExpr {
        match a {
            FieldExpr::Const(c) => FieldExpr::Const(-c),
            FieldExpr::Neg(inner) => (*inner).clone(),
            other => FieldExpr::Neg(Arc::new(other)),
        }
    }

    pub fn powi(a: FieldExpr, n: i32) -> FieldExpr {
        match n {
            0 => FieldExpr::Const(ONE),
            1 => a,
            _ => match a.as_const() {
                Some(c) if c != ZERO || n > 0 => FieldExpr::Const(c.powi(n)),
                _ => FieldExpr::Pow(Arc::new(a), n),
            },
        }
    }

    pub fn sqrt(a: FieldExpr) -> FieldExpr {
        FieldExpr::Sqrt(Arc::new(a))
    }

    pub fn log(a: FieldExpr) -> FieldExpr {
        FieldExpr::Log(Arc::new(a))
    }

    pub fn exp(a: FieldExpr) -> FieldExpr {
        FieldExpr::Exp(Arc::new(a))
    }

    /// Number of real coordinates the expression needs (0 for constants).
    pub fn coordinate_extent(&self) -> usize {
        match self {
            FieldExpr::Const(_) => 0,
            FieldExpr::Var(v) => v.coordinate_extent(),
            FieldExpr::Add(a, b)
            | FieldExpr::Sub(a, b)
            | FieldExpr::Mul(a, b)
            | FieldExpr::Div(a, b) => a.coordinate_extent().max(b.coordinate_extent()),
            FieldExpr::Neg(a)
            | FieldExpr::Pow(a, _)
            | FieldExpr::Sqrt(a)
            | FieldExpr::Log(a)
            | FieldExpr::Exp(a) => a.coordinate_extent(),
        }
    }

    /// Direct pointwise evaluation (no jets involved).
    pub fn eval(&self, p: &[f64]) -> Result<Complex64> {
        let check = |v: Complex64, what: &str| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::SingularEvaluation(format!("{what} is not finite")))
            }
        };
        let principal = |v: Complex64, what: &str| {
            if v.im.abs() <= 1e-14 * v.norm().max(1.0) && v.re <= 0.0 {
                Err(Error::SingularEvaluation(format!("{what} of {v}")))
            } else {
                Ok(v)
            }
        };
        Ok(match self {
            FieldExpr::Const(c) => *c,
            FieldExpr::Var(v) => {
                if v.coordinate_extent() > p.len() {
                    return Err(Error::Invalid(format!(
                        "variable {v} outside a {}-dimensional chart",
                        p.len()
                    )));
                }
                let s = std::f64::consts::FRAC_1_SQRT_2;
                match *v {
                    Var::X(m) => Complex64::new(p[m], 0.0),
                    Var::Z(j) => Complex64::new(p[2 * j], -p[2 * j + 1]) * s,
                    Var::Zbar(j) => Complex64::new(p[2 * j], p[2 * j + 1]) * s,
                }
            }
            FieldExpr::Add(a, b) => a.eval(p)? + b.eval(p)?,
            FieldExpr::Sub(a, b) => a.eval(p)? - b.eval(p)?,
            FieldExpr::Mul(a, b) => a.eval(p)? * b.eval(p)?,
            FieldExpr::Div(a, b) => {
                let d = b.eval(p)?;
                if d.norm() == 0.0 {
                    return Err(Error::SingularEvaluation("division by zero".into()));
                }
                a.eval(p)? / d
            }
            FieldExpr::Neg(a) => -a.eval(p)?,
            FieldExpr::Pow(a, n) => {
                let v = a.eval(p)?;
                if *n < 0 && v.norm() == 0.0 {
                    return Err(Error::SingularEvaluation("negative power of zero".into()));
                }
                check(v.powi(*n), "power")?
            }
            FieldExpr::Sqrt(a) => principal(a.eval(p)?, "sqrt")?.sqrt(),
            FieldExpr::Log(a) => principal(a.eval(p)?, "log")?.ln(),
            FieldExpr::Exp(a) => check(a.eval(p)?.exp(), "exp")?,
        })
    }

    /// Symbolic derivative. `Z` and `Zbar` are independent (Wirtinger)
    /// variables; differentiating by `X` goes through the chain rule for them.
    pub fn diff(&self, var: Var) -> FieldExpr {
        use FieldExpr as E;
        match self {
            E::Const(_) => E::real(0.0),
            E::Var(v) => var_derivative(*v, var),
            E::Add(a, b) => E::add(a.diff(var), b.diff(var)),
            E::Sub(a, b) => E::sub(a.diff(var), b.diff(var)),
            E::Mul(a, b) => E::add(
                E::mul(a.diff(var), (**b).clone()),
                E::mul((**a).clone(), b.diff(var)),
            ),
            E::Div(a, b) => {
                // (a' b - a b') / b^2
                let num = E::sub(
                    E::mul(a.diff(var), (**b).clone()),
                    E::mul((**a).clone(), b.diff(var)),
                );
                E::div(num, E::powi((**b).clone(), 2))
            }
            E::Neg(a) => E::neg(a.diff(var)),
            E::Pow(a, n) => E::mul(
                E::mul(E::real(*n as f64), E::powi((**a).clone(), n - 1)),
                a.diff(var),
            ),
            E::Sqrt(a) => E::div(a.diff(var), E::mul(E::real(2.0), self.clone())),
            E::Log(a) => E::div(a.diff(var), (**a).clone()),
            E::Exp(a) => E::mul(self.clone(), a.diff(var)),
        }
    }

    /// Taylor jet of the expression at `p`, see [`jet_lift`].
    pub fn lift(&self, base: &Arc<[f64]>, order: usize) -> Result<Jet> {
        use FieldExpr as E;
        Ok(match self {
            E::Const(c) => Jet::constant(base, order, *c),
            E::Var(v) => {
                if v.coordinate_extent() > base.len() {
                    return Err(Error::Invalid(format!(
                        "variable {v} outside a {}-dimensional chart",
                        base.len()
                    )));
                }
                let s = std::f64::consts::FRAC_1_SQRT_2;
                match *v {
                    Var::X(m) => Jet::coordinate(base, order, m),
                    Var::Z(j) | Var::Zbar(j) => {
                        let sign = if matches!(v, Var::Z(_)) { -1.0 } else { 1.0 };
                        let re = Jet::coordinate(base, order, 2 * j);
                        let im = Jet::coordinate(base, order, 2 * j + 1);
                        (&re + &im.scale(Complex64::new(0.0, sign))).scale_real(s)
                    }
                }
            }
            E::Add(a, b) => a.lift(base, order)? + b.lift(base, order)?,
            E::Sub(a, b) => a.lift(base, order)? - b.lift(base, order)?,
            E::Mul(a, b) => a.lift(base, order)? * b.lift(base, order)?,
            E::Div(a, b) => a.lift(base, order)? * b.lift(base, order)?.recip()?,
            E::Neg(a) => -a.lift(base, order)?,
            E::Pow(a, n) => a.lift(base, order)?.powi(*n)?,
            E::Sqrt(a) => a.lift(base, order)?.sqrt()?,
            E::Log(a) => a.lift(base, order)?.ln()?,
            E::Exp(a) => a.lift(base, order)?.exp(),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            FieldExpr::Add(..) | FieldExpr::Sub(..) => 1,
            FieldExpr::Mul(..) | FieldExpr::Div(..) => 2,
            FieldExpr::Neg(_) => 3,
            FieldExpr::Pow(..) => 4,
            FieldExpr::Const(c) if c.im != 0.0 || c.re < 0.0 => 1,
            _ => 5,
        }
    }
}

fn var_derivative(v: Var, by: Var) -> FieldExpr {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match (v, by) {
        (a, b) if a == b => FieldExpr::real(1.0),
        (Var::Z(j), Var::X(m)) | (Var::Zbar(j), Var::X(m)) => {
            let conj = matches!(v, Var::Zbar(_));
            if m == 2 * j {
                FieldExpr::real(s)
            } else if m == 2 * j + 1 {
                FieldExpr::complex(Complex64::new(0.0, if conj { s } else { -s }))
            } else {
                FieldExpr::real(0.0)
            }
        }
        (Var::X(m), Var::Z(j)) | (Var::X(m), Var::Zbar(j)) => {
            // x_{2j-1} = (z + zb)/√2, x_{2j} = i (z - zb)/√2
            let conj = matches!(by, Var::Zbar(_));
            if m == 2 * j {
                FieldExpr::real(s)
            } else if m == 2 * j + 1 {
                FieldExpr::complex(Complex64::new(0.0, if conj { -s } else { s }))
            } else {
                FieldExpr::real(0.0)
            }
        }
        _ => FieldExpr::real(0.0),
    }
}

/// Degree-`order` Taylor expansion of `expr` at `p`.
pub fn jet_lift(expr: &FieldExpr, p: &[f64], order: usize) -> Result<Jet> {
    let base: Arc<[f64]> = Arc::from(p.to_vec());
    expr.lift(&base, order)
}

fn fmt_const(c: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        write!(f, "{}", c.re)
    } else if c.re == 0.0 {
        write!(f, "{}*i", c.im)
    } else {
        write!(f, "{} + {}*i", c.re, c.im)
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &FieldExpr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            FieldExpr::Const(c) => fmt_const(*c, f),
            FieldExpr::Var(v) => write!(f, "{v}"),
            FieldExpr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            FieldExpr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            FieldExpr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            FieldExpr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            FieldExpr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 3)
            }
            FieldExpr::Pow(a, n) => {
                wrap(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            FieldExpr::Sqrt(a) => write!(f, "sqrt({a})"),
            FieldExpr::Log(a) => write!(f, "log({a})"),
            FieldExpr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}
