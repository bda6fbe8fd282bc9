//! Exact-arithmetic toolkit for Bratteli diagrams, S-adic subshifts and
//! factor complexity.
//!
//! The crate turns a truncated simple Bratteli diagram plus a superlinear
//! complexity target into an ordered diagram and directive sequence realizing
//! the same inductive-limit data, then verifies the finite-stage consequences
//! by brute force: splitting identities, change-of-basis intertwinings,
//! complexity bounds, equal-row-sum structure and Toeplitz periodicity.
//!
//! All arithmetic is exact (`num-bigint` / `num-rational` scalars, no
//! floating point on any verified path). Word-level scans can run
//! data-parallel behind the `parallel` feature (on by default) with a
//! sequential fallback producing bitwise identical results.

pub mod bratteli;
pub mod construct;
pub mod error;
pub mod exact;
pub mod language;
pub mod morphism;
pub mod target;
mod util;

pub use error::{Error, Result};
