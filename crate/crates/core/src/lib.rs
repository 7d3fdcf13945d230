//! Battery monitoring and per-application energy attribution.
//!
//! * [`sources`] reads battery state and the running-application list.
//! * [`inspector`] flags critical battery conditions.
//! * [`recorder`] samples periodically into an append-only JSONL log.
//! * [`analyzer`] turns a log into per-application drain rates and a ranking.
//! * [`simulator`] produces logs from workloads with known power draw.
//!
//! The numeric kernels ([`nnls`], [`analyzer::rate_to_power`]) are generic over
//! [`Scalar`]; the aliases below fix them to `f64`.

pub mod analyzer;
pub mod clock;
pub mod inspector;
pub mod nnls;
pub mod recorder;
pub mod scalar;
pub mod simulator;
pub mod sources;

pub use clock::Clock;
pub use scalar::Scalar;

pub type Matrix64 = nnls::Matrix<f64>;
pub type Matrix32 = nnls::Matrix<f32>;
pub type NnlsSolution64 = nnls::NnlsSolution<f64>;
pub type NnlsOptions64 = nnls::NnlsOptions<f64>;
pub type PowerEstimate64 = analyzer::PowerEstimate<f64>;
