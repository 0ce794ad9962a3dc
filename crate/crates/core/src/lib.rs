//! Numerical chordal Loewner evolution in the upper half-plane.
//!
//! The crate computes the trace generated by a driving function (forward
//! direction, which includes SLE when the driver is `sqrt(kappa)` times
//! Brownian motion) and the driving function of a given curve (the zipper
//! direction). Both directions compose exactly solvable single-step maps,
//! vertical or tilted slits, and both can be accelerated by grouping maps
//! into blocks whose composition is carried as a truncated power series of
//! `1 / f(1 / z)`.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, timing and
//! the command-line interface live in the `loewner` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod driver;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod series;
pub mod slitmap;
pub mod stats;

pub use num_complex::Complex64;

pub use driver::DrivingPath;
pub use error::{Error, Result};
pub use forward::{AdaptiveConfig, AdaptiveRun, BlockParams, ForwardPlan, Trace};
pub use inverse::{CurveInput, Extraction};
pub use series::{BlockPlan, Direction, HatSeries};
pub use slitmap::{SlitKind, SlitMap};
pub use stats::{BmDiagnostics, KappaReport};
