//! Communication-efficient distributed mean estimation.
//!
//! Clients quantize their vectors stochastically (optionally after a random
//! Hadamard rotation, or with entropy-coded bin indices), the server decodes
//! and averages into an unbiased estimate of the mean, and the harness
//! measures MSE against the bits actually serialized.

pub mod apps;
pub mod bits;
pub mod data;
pub mod error;
pub mod harness;
pub mod mean;
pub mod quant;
pub mod rng;
pub mod sampling;
pub mod selftest;
pub mod transform;
pub mod vlc;
pub mod wire;

pub use error::{Error, Result};
pub use mean::{
    analytic_bound, analytic_mse_binary, exact_mean, squared_error, ClientVector, EstimationReport,
    MeanEstimate, Protocol, ProtocolConfig, ScalarPrecision, ScaleMode,
};
pub use transform::RotationSpec;
pub use wire::EncodedMessage;
