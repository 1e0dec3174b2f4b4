//! Thermodynamic formalism for transfer operators on finite dynamical
//! systems and one-step topological Markov chains.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the usual double-precision instantiation.

pub mod descriptor;
pub mod empirical;
pub mod error;
pub mod legendre;
pub mod lpshift;
pub mod markov;
pub mod matrix;
pub mod scalar;
pub mod spectral;
pub mod systems;
pub mod tentropy;

pub use descriptor::{BuiltSystem, SystemDescriptor};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::{ExtReal, Real};
pub use spectral::{Potential, SpectralResult};
pub use empirical::{EmpiricalMeasure, GrowthReport};
pub use legendre::{DualEntropyResult, VariationalReport};
pub use lpshift::{FiniteMeasureSystem, LpRadius, WeightedShift};
pub use markov::{MarkovMeasure, RadiusCheck, TmcDualCheck, VpCheck};
pub use systems::{FiniteMapSystem, InvariantMeasure, MarkovShiftSystem, Measure, TransferMatrix};
pub use tentropy::{PartitionOfUnity, TauResult};

pub type Matrix64 = Matrix<f64>;
pub type Ext64 = ExtReal<f64>;
pub type Potential64 = Potential<f64>;
pub type Measure64 = Measure<f64>;
pub type TransferMatrix64 = TransferMatrix<f64>;
pub type MarkovShift64 = MarkovShiftSystem<f64>;
pub type MarkovMeasure64 = MarkovMeasure<f64>;
pub type WeightedShift64 = WeightedShift<f64>;
pub type SystemDescriptor64 = SystemDescriptor<f64>;
