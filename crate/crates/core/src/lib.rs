//! Three-mirror (membrane-in-the-middle) cavity optomechanics.
//!
//! All frequencies are angular [rad/s] and all quantities SI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod bichromatic;
pub mod config;
pub mod constants;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod langevin;
pub mod modespectrum;
pub mod numerics;
pub mod thermometry;

pub use error::{Error, Result};
