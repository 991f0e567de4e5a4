//! Executable numerics for uniform convergence of nonconvex-(strongly)-concave
//! stochastic minimax problems `min_x max_y E f(x, y; xi)`.
//!
//! - [`domains`]: compact convex sets, projection, covering nets
//! - [`problems`]: stochastic instances, datasets and synthetic families
//! - [`oracles`]: primal functions, Danskin gradients, gradient mappings,
//!   proximal points and Moreau-envelope gradients
//! - [`bounds`]: closed-form stability, concentration and sample-size bounds
//! - [`experiments`]: Monte Carlo measurements and inequality verifiers

pub mod bounds;
pub mod domains;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod oracles;
pub mod problems;

pub use error::{Error, Result};

/// Library version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
