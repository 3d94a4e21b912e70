//! Layer-wise position probing for long-context retrieval prompts.
//!
//! The crate covers the whole offline pipeline that sits around a language
//! model: generating key-value and multi-document QA corpora with the gold
//! item at scheduled positions ([`corpus`]), reading and writing per-layer
//! last-token embedding archives ([`tensor_store`]), training linear
//! position probes per layer ([`probe`]), and the downstream analyses
//! ([`analysis`]). [`synth`] builds archives with a planted positional signal
//! so everything can be checked without a model.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pin the common instantiations.

pub mod analysis;
pub mod corpus;
pub mod probe;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tensor_store;
pub mod text;

pub use scalar::Scalar;

pub type ProbeModelF32 = probe::ProbeModel<f32>;
pub type ProbeModelF64 = probe::ProbeModel<f64>;
pub type PcaModelF32 = analysis::pca::PcaModel<f32>;
pub type PcaModelF64 = analysis::pca::PcaModel<f64>;
pub type RegressionResultF64 = analysis::regression::RegressionResult<f64>;
pub type DistanceCurveF64 = analysis::distance::DistanceCurve<f64>;
pub type LogitLensCurveF32 = analysis::lens::LogitLensCurve<f32>;
pub type LogitLensCurveF64 = analysis::lens::LogitLensCurve<f64>;
