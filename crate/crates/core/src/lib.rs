//! Finite-element laboratory for L-infinity a priori estimates of
//! `-Δu + u = 0` in the unit cube with a nonlinear flux `∂u/∂η = f(x, u)`.
//!
//! Numerical modules are generic over [`scalar::Real`] (`f32`, `f64`); the
//! exponent algebra is generic over [`scalar::ExponentScalar`] and is exact
//! with [`Rational`]. The aliases below fix the common concrete choices.

// `!(x > 0)` sends NaN to the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod exponents;
pub mod krylov;
pub mod linear_solver;
pub mod mesh;
pub mod nonlinear;
pub mod norms;
pub mod quadrature;
pub mod scalar;
pub mod sparse;
pub mod verify_chain;

/// Exact rational scalar used for the exponent algebra.
pub type Rational = num_rational::BigRational;

pub type ExactContext = exponents::ExponentContext<Rational>;
pub type FloatContext = exponents::ExponentContext<f64>;

pub type Mesh = mesh::Mesh<f64>;
pub type MeshF32 = mesh::Mesh<f32>;
pub type FeSpace = assembly::FeSpace<f64>;
pub type FeSpaceF32 = assembly::FeSpace<f32>;
pub type FemFunction<'s> = assembly::FemFunction<'s, f64>;
pub type SparseOperator = sparse::SparseOperator<f64>;
