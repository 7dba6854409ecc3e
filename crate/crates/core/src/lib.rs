//! Safety filtering for drone-racing gate traversal.
//!
//! A distance map around one gate archetype is precomputed (optionally
//! inflated for bounded gate-pose error). At runtime the map yields a
//! zeroing-barrier constraint on the commanded velocity, and a small
//! projection QP modifies the nominal action only as much as needed to
//! satisfy it. The `sim` module closes the loop on randomized racing tracks.

pub mod barrier;
pub mod config;
pub mod error;
pub mod field;
pub mod filter;
pub mod geometry;
pub mod output;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::Vec3;
