//! Exact computer algebra for SAT-to-sparse-polynomial gadget reductions.
//!
//! The library builds families of multivariate polynomials from 3-CNF
//! formulas such that a formula is satisfiable exactly when the polynomial
//! can be made sparse (or low-support) by an invertible change of variables
//! or a translation. Everything is exact: rational or prime-field
//! coefficients, big-integer exponents, no floating point.
//!
//! Module map:
//! - [`algebra`]: fields, big exponents, Lucas binomials, digit counts.
//! - [`sparsepoly`]: sparse polynomials, affine substitution, statistics.
//! - [`cnf`]: DIMACS parsing, normalization passes, tiny exhaustive solver.
//! - [`reductions`]: parameter schedules and instance builders.
//! - [`witness`]: forward witnesses, verification, assignment extraction,
//!   brute-force family search.

pub mod algebra;
pub mod cnf;
pub mod reductions;
pub mod sparsepoly;
pub mod witness;
