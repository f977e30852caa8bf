//! Test-time marginalization of nuisance variability for image
//! classification, plus domain-size pooled descriptors for region matching.
//!
//! The pipeline is: generate region samples (regular crops, concentric
//! domain sizes, object proposals), classify each one, prune proposals by
//! Rényi entropy, and average the surviving class posteriors.

pub mod imagegeom;
pub mod inference;
pub mod marginal;
pub mod matching;
pub mod proposals;
pub mod schedules;

pub use imagegeom::{BBox, Image, RegionSample};
