//! Sampling unnormalized densities with velocity fields stored as functional tensor trains.
//!
//! A Gaussian latent is transported along the geometric path between its energy and the
//! target energy. Each step fits a Fourier tensor-train velocity by ALS on the path's
//! continuity equation, then moves particles with RK4 while tracking their log-density.
//! Optional Langevin moves and importance resampling correct the flow.
//!
//! [`pipeline::train`] and [`pipeline::sample`] drive a run from a [`RunConfig`];
//! [`metrics::energy_distance`] scores samples against a ground-truth sampler.

// `!(x > 0.0)` style guards reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod als;
pub mod basis;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod metrics;
pub mod pipeline;
pub mod points;
pub mod rng;
pub mod targets;
pub mod tt;

pub use config::{Method, RunConfig, TargetSpec};
pub use error::{Error, Result};
pub use points::Points;
pub use tt::{Core, Direction, TensorTrain};
