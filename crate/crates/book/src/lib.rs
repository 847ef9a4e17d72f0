//! The guide's chapters, one module each, so `cargo test` compiles and runs
//! every code block in them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/jets.md")]
pub mod jets {}
#[doc = include_str!("../../../book/src/brackets.md")]
pub mod brackets {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/complex-structures.md")]
pub mod complex_structures {}
#[doc = include_str!("../../../book/src/supercharges.md")]
pub mod supercharges {}
#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
