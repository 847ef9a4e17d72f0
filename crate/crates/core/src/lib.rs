//! Classical supercharges of supersymmetric sigma models on complex,
//! Kähler, hyper-Kähler and HKT manifolds, checked pointwise with jets.
//!
//! The crate builds the Grassmann phase-space algebra over Taylor jets, the
//! chart geometry of a metric (vielbein, Christoffel symbols, spin
//! connection), complex-structure diagnostics (Nijenhuis, Bismut torsion, HKT
//! covariant constancy) and the supercharges themselves, then verifies the
//! graded-bracket algebra at sampled points.

#![allow(clippy::needless_range_loop)]

pub mod complex_structures;
pub mod error;
pub mod geometry;
pub mod input;
pub mod jets;
pub mod supercharges;
pub mod superspace;
pub mod verifier;
pub mod zoo;

pub use error::{Error, Result};
