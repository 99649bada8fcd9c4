//! Gaussian process surrogates for option prices and their Greeks, with
//! Monte Carlo data generators and a discrete Delta-hedging simulator.
//!
//! The surrogate core ([`kernels`], [`gp`], [`greeks`], [`metrics`]) is
//! generic over the floating-point type; the aliases below fix it to `f64`,
//! which is what the market models and experiments use.

pub mod designs;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod greeks;
pub mod hedging;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Kernel = kernels::KernelSpec<f64>;
pub type Gp = gp::GpModel<f64>;
pub type Training = gp::TrainingSet<f64>;
pub type Greek = greeks::GreekEstimate<f64>;
pub type Band = greeks::CredibleBand<f64>;
pub type DenseMatrix = linalg::Matrix<f64>;
