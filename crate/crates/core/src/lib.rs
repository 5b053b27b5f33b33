//! Equivariant gradient degree for S¹-equivariant gradient perturbations of
//! self-adjoint operators with discrete spectrum.
//!
//! The numerical core is generic over [`Scalar`] (`f32`, `f64`); ring
//! arithmetic is exact. The aliases below fix the scalar to `f64`.

pub mod corpus;
pub mod euler_ring;
pub mod findim;
pub mod galerkin;
pub mod hamiltonian;
pub mod numeric;
pub mod region;
pub mod scalar;
pub mod selftest;
pub mod srep;

pub use euler_ring::{limit_class_equal, DirectLimitClass, GroupDescriptor, RingElement, RingError, SubgroupClass};
pub use findim::{brouwer_oracle, grad_degree, linear_degree, DegreeError};
pub use galerkin::{deg_along_otopy, deg_infinite, deg_infinite_with, DegreeRecord, DegreeResult, GalerkinError, GalerkinOptions, Truncation};
pub use hamiltonian::{periodic_existence, HamiltonianError, HamiltonianSpec, Verdict};
pub use scalar::Scalar;
pub use srep::{Layout, Rep, RepError};

pub type SymOp = srep::EquivariantSymOp<f64>;
pub type Spectrum = srep::SpectralOperator<f64>;
pub type Field = findim::GradientField<f64>;
pub type LocalMap = galerkin::LocalMapSpec<f64>;
pub type Domain = galerkin::GraphDomain<f64>;
pub type Loop = hamiltonian::LoopState<f64>;
