//! Cavity electromagnetically induced transparency in an ion Coulomb crystal:
//! susceptibility models, steady-state spectra, transient buildup and the
//! fitting used to extract linewidths and scaling laws.
// NaN must fail these guards, so negated comparisons are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fit;
pub mod params;
pub mod presets;
pub mod quadrature;
pub mod spectrum;
pub mod susceptibility;
pub mod units;

pub use error::{Error, Result};
pub use exec::Execution;
