//! Copula-based risk aggregation driven by simulated quantum Monte Carlo
//! integration.
//!
//! The pipeline estimates each marginal CDF as a truncated Hermite series
//! whose coefficients come from a statistical simulator of quantum amplitude
//! estimation ([`osde`], [`qae`]), plugs the estimated CDFs into a copula
//! density ([`copula`]) and integrates risk payoffs against the independent
//! product distribution ([`risk`]). A classical sample-sort-rearrange
//! baseline ([`classical`]) serves as the independent reference.
//!
//! Numerical modules are generic over [`Scalar`] (`f32`/`f64`); the
//! `*64` aliases below fix the scalar to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod copula;
pub mod error;
mod linalg;
pub mod marginals;
pub mod osde;
pub mod qae;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use qae::{QaeMode, QmciResult, QueryLedger};
pub use rng::RngStream;
pub use scalar::Scalar;

pub type MarginalSpec64 = marginals::MarginalSpec<f64>;
pub type DiscretizedMarginal64 = marginals::DiscretizedMarginal<f64>;
pub type TruncationWindow64 = special::TruncationWindow<f64>;
pub type CopulaModel64 = copula::CopulaModel<f64>;
pub type EstimatedCdf64 = osde::EstimatedCdf<f64>;
pub type SmoothnessParams64 = osde::SmoothnessParams<f64>;
pub type AggregationSetup64 = risk::AggregationSetup<f64>;
pub type PayoffSpec64 = risk::PayoffSpec<f64>;
pub type RiskReport64 = risk::RiskReport<f64>;
pub type SampleMatrix64 = classical::SampleMatrix<f64>;

pub type MarginalSpec32 = marginals::MarginalSpec<f32>;
pub type EstimatedCdf32 = osde::EstimatedCdf<f32>;
