//! Hermitian–Einstein metrics on split bundles over the Riemann sphere.
//!
//! The base is P¹ with the Fubini–Study form ω = (i/2π)∂∂̄ log(1+|z|²),
//! normalized so that ∫ω = 1 and deg O(d) = d. Bundles are sums of line
//! bundles O(aᵢ); metrics are pointwise evaluators in the monomial frame of
//! whichever chart owns the point.

pub mod asymptotics;
pub mod bundle;
pub mod donaldson;
mod error;
pub mod geometry;
pub mod linalg;
pub mod quot;
pub mod sections;
pub mod solver;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
