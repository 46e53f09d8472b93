//! Exact transverse-magnetization decay in the Emch-Radin spin chain with
//! nonrandom, Bernoulli and Gaussian couplings.
//!
//! The transverse spin at a site decays as an infinite product of cosines
//! over its couplings. This crate evaluates those products with certified
//! errors, averages them over disorder, classifies the decay law and
//! enumerates small-volume partition functions.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod decay;
pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod potential;
mod product;
pub mod special;
pub mod stats;
pub mod thermo;

pub use disorder::{CouplingField, Couplings, DisorderSpec, Distribution, Magnitude, Uniform};
pub use dynamics::{InitialState, MagnetizationCurve, ProductEstimate, TimeGrid, TruncationPolicy};
pub use error::{Error, Result};
pub use potential::{PotentialSpec, Summability, TailSum};

/// Version shared by every module of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
