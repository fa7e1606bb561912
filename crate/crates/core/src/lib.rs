//! Batched line-segment / triangle-mesh intersection queries accelerated
//! by a Morton-ordered linear BVH (binary radix tree).
//!
//! The pipeline mirrors the classic data-parallel layout: compute the
//! surface extent and per-segment bounds, quantize triangle centroids to
//! 64-bit Morton codes, sort, build the radix tree bottom-up with arrival
//! counters, then traverse per segment and filter candidates with the
//! Moller-Trumbore predicate. Three output modes are supported: a
//! boolean intersects/misses vector, nearest-hit records with distances
//! and locations, and unique-crossing counts.
//!
//! An exhaustive [`oracle`] engine answers the same queries without any
//! acceleration structure, and [`diagnostics`] can serialize, decode,
//! dump and graph the tree for inspection.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lbvh;
pub mod morton;
pub mod oracle;
pub mod query;
pub mod scene;

pub use error::DataError;
pub use geometry::{Aabb, Hit, Mesh, Point3, Segment, SegmentBatch};
pub use lbvh::{build_bvh, bvh_validate, Bvh, IntegrityReport};
pub use query::{
    run_pipeline, HitResult, PipelineError, PipelineOutput, QueryConfig, QueryMode, QueryStats,
    TimingBreakdown,
};
