//! Collisional dynamics of two bodies orbiting a fixed central mass.
//!
//! Each body moves on a Kepler orbit about the center; at contact the pair
//! exchanges momentum through a hard-sphere impact with restitution
//! `1 - 2 eps`. The crate computes orbit geometry, the invariant regions of
//! the reduced `(dL, dE)` plane, the critical thresholds on `E L^2` that
//! rule out escape, and simulates collision sequences.

// `!(x < y)` is used on purpose so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod kepler;
pub mod regions;
pub mod scan;
pub mod search;
pub mod spatial;
pub mod verify;

pub use error::{Error, Result};
pub use kepler::{ConicClass, MassSplit, OrbitElements, PlanarState};
