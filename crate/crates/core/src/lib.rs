//! Coverage, association and handoff analysis for small-cell networks whose
//! path-loss exponent varies by direction around each base station.
//!
//! The numerical core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix it to `f64`.

pub mod analytic;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod montecarlo;
pub mod propagation;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod tessellation;
pub mod validation;

pub use error::{Error, Result};

pub type Model = config::NetworkModel<f64>;
pub type Antenna = config::AntennaPattern<f64>;
pub type Mobility = config::MobilityModel<f64>;
pub type Evaluator = analytic::Analytic<f64>;
pub type Coverage = analytic::Coverage<f64>;
pub type ModelF32 = config::NetworkModel<f32>;
pub type AntennaF32 = config::AntennaPattern<f32>;
pub type EvaluatorF32 = analytic::Analytic<f32>;
