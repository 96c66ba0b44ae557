//! Periodic maximizing measures for piecewise-linear circle endomorphisms.
//!
//! Given a map `f`, a potential `φ₀` and a budget `ε`, the pipeline builds a
//! map `f̂` with `d(f, f̂) < ε` whose `φ₀`-maximizing invariant measure sits on
//! a periodic orbit, and certifies the outcome with Ulam-graph upper bounds
//! and periodic-orbit lower bounds.

pub mod birkhoff;
pub mod certify;
pub mod circle;
pub mod config;
pub mod error;
pub mod measure;
pub mod perturb;

pub use circle::{Arc, CirclePoint, LocalHomeo, PlMap, Potential};
pub use error::{Error, Result};
