//! Diagnostics for sampled space-time velocity/pressure fields.
//!
//! The crate computes distribution functions and weak-Lorentz norms over
//! balls and time intervals, Morrey-type suprema over dyadic radius ladders,
//! the scale-invariant quantities `A`, `B`, `C`, `D` over parabolic
//! cylinders, local energy residuals with a backward heat-kernel test
//! function, and the epsilon-regularity and concentration-rate decision
//! procedures built on top of them.
//!
//! Everything here is pure and allocation-only (`no_std` + `alloc`). File
//! formats, spectral solvers and the command line live in the `nssl` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod detector;
pub mod energy;
pub mod error;
pub mod field;
pub mod invariants;
pub mod lorentz;
pub mod morrey;
pub mod synth;

mod math;

pub use error::{Error, Result};
pub use field::{BallSpec, BallStencil, CylinderSpec, Grid, SampledField};
