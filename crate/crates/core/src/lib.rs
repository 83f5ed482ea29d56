//! Column normalization of heavy-tailed random measurement matrices.
//!
//! The library builds the spike variable `x = ε·max{1, ηR}`, samples the
//! matrices it generates, and checks whether their column-normalized versions
//! support exact sparse recovery by basis pursuit. Recovery is decided
//! exactly through per-support null-space LPs solved by an in-crate simplex
//! solver that also runs in rational arithmetic.
//!
//! Numeric modules are generic over the scalar type; the aliases below fix
//! the common instantiations.

pub mod ensemble;
pub mod geometry;
pub mod harness;
pub mod lp;
pub mod recovery;
pub mod report;
pub mod scalar;
pub mod spike;

pub use scalar::{LpScalar, Rational, Real};

/// Dense row-major matrix.
pub type Matrix<T> = ndarray::Array2<T>;

pub type Matrix64 = Matrix<f64>;
pub type SpikeParams64 = spike::SpikeParams<f64>;
pub type SpikeParams32 = spike::SpikeParams<f32>;
pub type EnsembleDraw64 = ensemble::EnsembleDraw<f64>;
pub type NormalizedMatrix64 = ensemble::NormalizedMatrix<f64>;
pub type LpInstance64 = lp::LpInstance<f64>;
pub type LpInstanceExact = lp::LpInstance<Rational>;
pub type LpResult64 = lp::LpResult<f64>;
pub type LpResultExact = lp::LpResult<Rational>;
pub type WitnessReport64 = recovery::WitnessReport<f64>;
pub type InradiusResult64 = geometry::InradiusResult<f64>;

/// Version string recorded in report headers.
pub const VERSION: &str = concat!("colnorm ", env!("CARGO_PKG_VERSION"));
