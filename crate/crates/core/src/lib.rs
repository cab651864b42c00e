//! Interpretability workbench for small image classifiers.
//!
//! A procedural style-based generator renders synthetic scenes whose
//! attributes are controlled by per-layer styles. On top of it sit inversion
//! of images back into a style, latent edit directions fitted by logistic
//! regression, and gradient attribution baselines.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod classifier;
pub mod codec;
pub mod config;
pub mod directions;
pub mod error;
pub mod generator;
pub mod inversion;
pub mod numeric;
pub mod par;
pub mod scenario;

pub use error::{Error, Result};
