//! Clock-synchronized city microsimulation over a road/AOI/POI urban model.

pub mod carfollow;
pub mod citymap;
pub mod error;
pub mod events;
pub mod flows;
pub mod geometry;
pub mod index;
pub mod infra;
pub mod ingest;
pub mod kg;
pub mod kernel;
pub mod mobility;
pub mod model;
pub mod nl;
pub mod popgen;
pub mod routing;
pub mod snapshot;
pub mod synthetic;
pub mod validate;

pub use error::{Error, Result};
