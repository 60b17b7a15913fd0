//! Representations of positive integral quadratic polynomials.
//!
//! The crate decides representation, local solubility, universality and
//! regularity questions for quadratic polynomials with positive definite
//! quadratic part, with dedicated machinery for triangular forms
//! `Δ(α₁, …, αₙ) = Σ αᵢ xᵢ(xᵢ+1)/2` and for lattice cosets `M + v`.

#![allow(clippy::needless_range_loop)]

pub mod arith;
pub mod cli;
pub mod enumerate;
pub mod error;
pub mod lattice;
pub mod local;
pub mod poly;
pub mod reduce;
pub mod search;
pub mod triangular;

pub use arith::{Budget, Rational};
pub use error::{Error, Result};
pub use lattice::{Coset, IntegralLattice};
pub use local::{LocalMethod, LocalOptions, LocalVerdict};
pub use poly::{AffineTransform, Completion, QuadPoly};
pub use reduce::{equivalence, equivalent, is_reduced, minkowski_reduce, Reduction};
pub use search::{SearchConfig, SearchReport};
pub use triangular::{RegularityStatus, RegularityVerdict, TriangularForm};
