//! Top-k point-of-interest detection from field-of-view metadata of
//! georeferenced photos and videos.
//!
//! A FoV record ⟨p, θ, R, α⟩ describes what a camera could see: its
//! location, azimuth, maximum visible distance and visible angle. The
//! library grids a query area, accumulates a Gaussian capture-intention
//! score per cell over all FoVs in range, and returns the k best cells.
//! Four detectors trade accuracy for speed: a naive baseline, an
//! MBR-filtered baseline, single sampling, and clustering with
//! incremental sampling.

pub mod datagen;
pub mod detect;
pub mod error;
pub mod geo;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod store;

pub use detect::{detect, Algo, CisParams, Query, StopCriterion, StopKind, TopKResult};
pub use error::{Error, Result};
pub use geo::{FoV, GeoPoint, Mbr};
pub use grid::{CellRef, CiMatrix, GridSpec};
pub use model::ModelParams;
pub use store::{FovStore, TimeInterval};
