//! Numerics for supersonic modulating pulses in an FPU chain whose
//! nearest-neighbor coupling attracts and whose next-to-nearest-neighbor
//! coupling repels.
//!
//! The toolkit covers the pipeline from the linear dispersion analysis
//! (critical wavespeed and carrier wavenumber where two eigenvalue pairs
//! collide on the imaginary axis) through the reduced normal form and its
//! existence condition, leading-order modulated-pulse profiles, a spectral
//! advance-delay boundary-value solver for the true traveling waves, and a
//! symplectic lattice integrator to verify the waves in direct simulation.
//!
//! Everything is generic over the scalar type via [`real::Real`]; the
//! `*64` aliases at the crate root fix `f64`, which all shipped tolerances
//! assume.

pub mod bvp;
pub mod dispersion;
pub mod lattice;
pub mod linalg;
pub mod normalform;
pub mod potentials;
pub mod quad;
pub mod real;
pub mod spectral;
pub mod util;
pub mod waves;

pub use real::Real;

/// Potential coefficients in `f64`.
pub type PotentialSpec64 = potentials::PotentialSpec<f64>;
/// Critical-point data in `f64`.
pub type CriticalData64 = dispersion::CriticalData<f64>;
/// Root set of the characteristic function in `f64`.
pub type EigenvalueSet64 = dispersion::EigenvalueSet<f64>;
/// Normal-form coefficient bundle in `f64`.
pub type NormalFormCoeffs64 = normalform::NormalFormCoeffs<f64>;
/// Pulse-family member parameters in `f64`.
pub type WaveAnsatz64 = waves::WaveAnsatz<f64>;
/// Solved traveling-wave profile in `f64`.
pub type ProfileSolution64 = bvp::ProfileSolution<f64>;
/// Chain state with `f64` scalars.
pub type LatticeState64 = lattice::LatticeState<f64>;
