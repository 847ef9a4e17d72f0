//! Truncated multivariate Taylor arithmetic.
//!
//! Every geometric quantity in the crate is represented by its jet at a base
//! point: the Taylor coefficients up to a fixed total degree. Differentiation
//! is exact coefficient bookkeeping, so derivatives carry no discretisation
//! error, only floating-point rounding.

mod expr;
mod jet;
mod layout;
mod parse;

pub use expr::{jet_lift, FieldExpr, Var};
pub use jet::{jet_arith, jet_partial, Jet, JetOp};

/// Default truncation order: one derivative for the connections, one for a
/// bracket, one more for nested brackets.
pub const DEFAULT_ORDER: usize = 3;
