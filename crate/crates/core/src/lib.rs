//! Simulation and verification tools for random walks in random scenery
//! and the self-intersection local time of the simple random walk on `Z^d`.

pub mod bessel;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod exponents;
pub mod green;
pub mod lattice;
pub mod num;
pub mod quadrature;
pub mod rng;
pub mod scenery;
pub mod silt;
pub mod stats;

pub use error::{Error, Result};
pub use num::Scalar;

pub type PhasePoint = exponents::PhasePoint<f64>;
pub type ExponentResult = exponents::ExponentResult<f64>;
pub type BoundaryValue = exponents::BoundaryValue<f64>;
pub type IidExponent = exponents::IidExponent<f64>;
pub type Strategy = exponents::Strategy<f64>;
pub type Estimate = quadrature::Estimate<f64>;
pub type GaussLegendre = quadrature::GaussLegendre<f64>;
pub type AdaptiveIntegrator = quadrature::AdaptiveIntegrator<f64>;

pub type PhasePointF32 = exponents::PhasePoint<f32>;
pub type ExponentResultF32 = exponents::ExponentResult<f32>;
