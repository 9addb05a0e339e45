//! Non-Hamiltonian bracket dynamics: classical thermostatted flows, the
//! quantum-classical bracket algebra, and a grid solver for the thermostatted
//! quantum-classical Liouville equation in the adiabatic basis.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below fix `f64`.

pub mod adiabatic;
pub mod algebra;
pub mod bracket;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod qcle;
pub mod scalar;
pub mod stationary;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PhasePoint64 = bracket::PhasePoint<f64>;
pub type EnsembleSpec64 = ensemble::EnsembleSpec<f64>;
pub type ExtendedHamiltonian64 = ensemble::ExtendedHamiltonian<f64>;
pub type PhaseGrid64 = grid::PhaseGrid<f64>;
pub type OperatorField64 = algebra::OperatorField<f64>;
pub type DensityField64 = qcle::DensityField<f64>;
pub type DMatrixSpec64 = algebra::DMatrixSpec<f64>;
pub type LiouvillianOp64 = qcle::LiouvillianOp<f64>;
pub type StationarySpec64 = stationary::StationarySpec<f64>;
