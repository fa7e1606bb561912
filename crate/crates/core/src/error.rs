//! Error types for data ingestion and pipeline execution.

use thiserror::Error;

/// Invalid input data (rejected at ingestion, before any geometry runs).
#[derive(Debug, Error)]
pub enum DataError {
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("mesh has no triangles")]
    NoTriangles,
    #[error("non-finite coordinate in {context} at index {index}")]
    NonFinite { context: &'static str, index: usize },
    #[error(
        "triangle {triangle} references vertex {vertex}, but the mesh has {n_vertices} vertices"
    )]
    VertexIndexOutOfRange {
        triangle: usize,
        vertex: u32,
        n_vertices: usize,
    },
    #[error("segment endpoint arrays differ in length ({from} from-points vs {to} to-points)")]
    EndpointCountMismatch { from: usize, to: usize },
}
