//! Isotropic Brownian flows built from spectral measures.
//!
//! * [`spectral`], [`covariance`]: spectral measures and the covariance
//!   tensor `b(x)` with its flow constants;
//! * [`rkhs`]: condition (C)_ρ, the mean inward field and the squeeze
//!   functional;
//! * [`field_sampler`]: exact Gaussian increments on point sets and drift
//!   fields;
//! * [`flow_engine`]: Euler/RK4 integration and Monte-Carlo experiments;
//! * [`cli`]: configuration files and the `ibflow` subcommands.

pub mod bessel;
pub mod cli;
pub mod covariance;
pub mod error;
pub mod field_sampler;
pub mod flow_engine;
pub mod parallel;
pub mod quadrature;
pub mod rkhs;
pub mod spectral;

pub use covariance::{FlowConstants, IbfModel, Kind, MatrixD};
pub use error::{Error, Result};
pub use field_sampler::{DriftField, IncrementSampler};
pub use flow_engine::{ExperimentReport, PathRecord, PointCloud};
pub use rkhs::{ConditionReport, SphereRule};
pub use spectral::SpectralMeasure;

/// Version tag embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
