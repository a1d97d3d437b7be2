//! Numerical laboratory for the Boole map `T(x) = x - 1/x`.
//!
//! The crate evaluates the map and its inverse branches in closed form,
//! applies the Perron-Frobenius (transfer) operator exactly through
//! inverse-branch recursion, and runs the experiments that probe
//! global-local mixing: correlation decay `m((F∘Tⁿ) g) → Av(F) m(g)`,
//! zero-type decay `m(T⁻ⁿA ∩ B) → 0`, cone invariance of the folded
//! operator, and distributional limits of observables and their Birkhoff
//! averages.
//!
//! Module map:
//!
//! - [`maps`]: `T`, the folded map `T̃`, the unit-interval conjugation, orbits.
//! - [`quadrature`]: adaptive Gauss-Kronrod integration on `ℝ` and windows.
//! - [`transfer_operator`]: `P`, `P̃`, `Pⁿ` with forward-mode derivatives.
//! - [`observables`]: global observables and the infinite-volume average.
//! - [`mixing_lab`]: correlation series, zero-type decay, truncation diagnostics.
//! - [`cone_verifier`]: cone membership, (H1)-(H4) scans, exact polynomial certificates.
//! - [`stochastic`]: empirical characteristic functions and KS statistics.
//! - [`cli`]: the config-driven experiment runner.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cone_verifier;
pub mod error;
pub mod maps;
pub mod mixing_lab;
pub mod observables;
pub mod quadrature;
pub mod rng;
pub mod stochastic;
pub mod svg;
pub mod table;
pub mod transfer_operator;

pub use error::{LabError, Result};
