//! Forward simulation of sparse, multi-frequency, polarized indoor CSI and
//! physics-supervised inversion of spatially varying permittivity and
//! conductivity from those measurements.

pub mod config;
pub mod em;
pub mod error;
pub mod field;
pub mod inversion;
pub mod metrics;
pub mod nn;
pub mod numerics;
pub mod optim;
pub mod pipeline;
pub mod scene;
pub mod simulator;

pub use error::{Error, Result};
