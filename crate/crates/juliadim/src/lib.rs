//! Numerical toolkit for Hausdorff-dimension estimates of quadratic Julia
//! sets near the tip of the Mandelbrot set.
//!
//! The library builds induced Cantor repellers for real parameters just
//! inside the tip, solves the pressure equation for their dimension, measures
//! Jones β-numbers of sampled Julia sets, and estimates the ball-mass
//! statistics of the critical orbit that drive the dimension upper bounds.
//!
//! Everything is deterministic under explicit seeds and pure except for the
//! emit helpers in [`experiments`].

pub mod beta;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod inducing;
pub mod pressure;
pub mod quadratic;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use quadratic::{FixedPair, Parameter, Regime};
