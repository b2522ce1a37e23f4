//! Block model restructuring against triangulated surfaces.
//!
//! The crate is organised bottom-up: [`geometry`] primitives, [`mesh`]
//! containers and the triangle index, the [`lattice`] data model, exact
//! [`intersection`] tests, ray-cast [`sidedness`], the coordinate-ascent
//! [`merge`] algorithms, the [`octree`] baseline, domain [`tagging`], the
//! end-to-end [`pipeline`], and evaluation [`metrics`].

pub mod error;
pub mod geometry;
pub mod intersection;
pub mod lattice;
pub mod merge;
pub mod mesh;
pub mod metrics;
pub mod octree;
pub mod parallel;
pub mod pipeline;
pub mod sidedness;
pub mod tagging;

pub use error::{Error, Result};
pub use geometry::{Aabb, Plane, Triangle, Vec3};
