//! Behaviour-map evolution and map-prior Bayesian optimisation for
//! fault recovery in simulated foraging robot swarms.

pub mod adaptation;
pub mod controller;
pub mod descriptors;
pub mod faults;
pub mod gp;
pub mod map_elites;
pub mod grid;
pub mod scalar;
pub mod sim;
pub mod seeds;
pub mod stats;

/// Default scalar type used by the pipeline.
pub type Real = f64;

/// Gaussian-process model over [`Real`].
pub type GpModel = gp::GpModel<Real>;
/// Kernel configuration over [`Real`].
pub type KernelConfig = gp::KernelConfig<Real>;
/// Penalisation state over [`Real`].
pub type PenalisationState = gp::PenalisationState<Real>;
