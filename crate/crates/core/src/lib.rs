//! Exact-arithmetic engine for Fedosov dg manifolds of Lie pairs.
//!
//! The crate builds, for a Lie pair `(L, A)` with quotient `B = L/A`, the
//! Fedosov homological vector field `Q = -k + d^∇ + X^∇` on `L[1] ⊕ B`, the
//! PBW isomorphism `Γ(SB) → U(L)/U(L)Γ(A)`, and the vertical intertwiner
//! `φ = e^Y` relating the Fedosov fields of two choices of splitting and
//! connection. Every construction works at a finite truncation order `N` in
//! the fiber coordinates, and all identities are checked as literal equality.
//!
//! All types are generic over a [`Scalar`]; the aliases at the crate root fix
//! it to exact rationals, which is what the verification layer uses.

pub mod coeff;
pub mod enveloping;
pub mod error;
pub mod fedosov;
pub mod function;
pub mod geodesic;
pub mod lie_pair;
pub mod operator;
pub mod presentation;
pub mod scalar;
pub mod vector_field;

pub use coeff::{Base, Coeff, XMonomial};
pub use error::{Error, Result};
pub use function::{ExteriorIndex, Shape, SymIndex};
pub use scalar::Scalar;

/// Arbitrary-precision rational numbers, always reduced.
pub type Rational = num_rational::BigRational;

pub type Coefficient = coeff::Coeff<Rational>;
pub type FormalFunction = function::FormalFunction<Rational>;
pub type PolySection = function::PolySection<Rational>;
pub type VerticalVectorField = vector_field::VerticalField<Rational>;
pub type BForm = vector_field::VerticalField<Rational>;
pub type LiePair = lie_pair::LiePair<Rational>;
pub type Connection = lie_pair::Connection<Rational>;
pub type SplittingOffset = lie_pair::SplittingOffset<Rational>;
pub type FedosovField = fedosov::FedosovField<Rational>;
pub type EnvelopingElement = enveloping::EnvelopingElement<Rational>;
pub type VerticalDifferentialOperator = operator::DiffOp<Rational>;
pub type FiltrationShiftingOperator = operator::ShiftingOperator<Rational>;
pub type Presentation = presentation::Presentation<Rational>;
