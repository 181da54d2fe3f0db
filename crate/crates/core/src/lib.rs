//! Numerics for Hill-model regulatory networks: balanced sampling of
//! semi-algebraic parameter regions, equilibrium enumeration, saddle-node
//! bifurcation detection along Hill-exponent paths, and chi-square
//! validation of the region/bifurcation correlation.
//!
//! The math core is generic over the scalar type through [`scalar::Real`]
//! (`f32` or `f64`); the aliases below pin the common double-precision
//! instantiation.

pub mod equilibria;
pub mod hill;
pub mod newton;
pub mod optimizer;
pub mod regions;
pub mod sampler;
pub mod saddle;
pub mod scalar;
pub mod stats;

pub use scalar::Real;

/// Double-precision instantiations of the generic core types.
pub type HillModel64 = hill::HillModel<f64>;
pub type HillEdgeParams64 = hill::HillEdgeParams<f64>;
pub type ReducedToggleParams64 = hill::ReducedToggleParams<f64>;
pub type Rectangle64 = equilibria::Rectangle<f64>;
pub type EquilibriumSet64 = equilibria::EquilibriumSet<f64>;
pub type HillPath64 = saddle::HillPath<f64>;
pub type SaddleConfig64 = saddle::SaddleConfig<f64>;
pub type SaddleOutcome64 = saddle::SaddleOutcome<f64>;
pub type NelderMeadConfig64 = optimizer::NelderMeadConfig<f64>;
pub type DistributionSpec64 = sampler::DistributionSpec<f64>;
pub type FisherProduct64 = sampler::FisherProduct<f64>;
pub type SquaredGaussian64 = sampler::SquaredGaussian<f64>;
