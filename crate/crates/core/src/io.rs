//! Headerless little-endian binary dataset and result files.
//!
//! Element counts are inferred from file sizes: vertex and endpoint files
//! hold packed `f32` xyz triples (12 bytes each), the triangle file holds
//! packed `u32` index triples. Result files depend on the query mode:
//! one byte per segment in boolean mode, one little-endian `u32` per
//! segment in intercept-count mode, and 24-byte records (segment id `u32`,
//! distance `f32`, triangle id `u32`, point 3 x `f32`) in barycentric
//! mode. Every index-bearing field is 32 bits wide, matching the in-core
//! triangle ids and the sorted permutation.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::DataError;
use crate::geometry::{Mesh, Point3, SegmentBatch};
use crate::query::{BarycentricHits, HitResult, QueryMode};

/// Bytes per packed xyz triple.
const TRIPLE_BYTES: usize = 12;
/// Bytes per barycentric result record.
pub const BARYCENTRIC_RECORD_BYTES: usize = 24;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: size {size} bytes is not divisible by {unit}")]
    SizeNotDivisible {
        path: PathBuf,
        size: usize,
        unit: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

fn read_file(path: &Path) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), LoadError> {
    fs::write(path, bytes).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_divisible(path: &Path, size: usize, unit: usize) -> Result<usize, LoadError> {
    if !size.is_multiple_of(unit) {
        return Err(LoadError::SizeNotDivisible {
            path: path.to_path_buf(),
            size,
            unit,
        });
    }
    Ok(size / unit)
}

fn read_point_triples(path: &Path) -> Result<Vec<Point3>, LoadError> {
    let bytes = read_file(path)?;
    let n = check_divisible(path, bytes.len(), TRIPLE_BYTES)?;
    let mut out = Vec::with_capacity(n);
    for chunk in bytes.chunks_exact(TRIPLE_BYTES) {
        out.push(Point3::new(
            f32::from_le_bytes(chunk[0..4].try_into().unwrap()),
            f32::from_le_bytes(chunk[4..8].try_into().unwrap()),
            f32::from_le_bytes(chunk[8..12].try_into().unwrap()),
        ));
    }
    Ok(out)
}

fn read_index_triples(path: &Path) -> Result<Vec<[u32; 3]>, LoadError> {
    let bytes = read_file(path)?;
    let n = check_divisible(path, bytes.len(), TRIPLE_BYTES)?;
    let mut out = Vec::with_capacity(n);
    for chunk in bytes.chunks_exact(TRIPLE_BYTES) {
        out.push([
            u32::from_le_bytes(chunk[0..4].try_into().unwrap()),
            u32::from_le_bytes(chunk[4..8].try_into().unwrap()),
            u32::from_le_bytes(chunk[8..12].try_into().unwrap()),
        ]);
    }
    Ok(out)
}

/// The four input files of one dataset.
#[derive(Clone, Debug)]
pub struct DatasetPaths {
    pub vertices: PathBuf,
    pub triangles: PathBuf,
    pub rays_from: PathBuf,
    pub rays_to: PathBuf,
}

/// Loads and validates a dataset: sizes must divide evenly, triangle
/// indices must be in range and every coordinate finite.
pub fn load_dataset(paths: &DatasetPaths) -> Result<(Mesh, SegmentBatch), LoadError> {
    let vertices = read_point_triples(&paths.vertices)?;
    let triangles = read_index_triples(&paths.triangles)?;
    let from = read_point_triples(&paths.rays_from)?;
    let to = read_point_triples(&paths.rays_to)?;

    let mesh = Mesh::new(vertices, triangles)?;
    let batch = SegmentBatch::from_endpoints(&from, &to)?;
    Ok((mesh, batch))
}

fn point_bytes(points: impl Iterator<Item = Point3>, out: &mut Vec<u8>) {
    for p in points {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
    }
}

/// Writes a dataset in the exact format [`load_dataset`] reads.
pub fn save_dataset(
    mesh: &Mesh,
    batch: &SegmentBatch,
    paths: &DatasetPaths,
) -> Result<(), LoadError> {
    let mut bytes = Vec::with_capacity(mesh.n_vertices() * TRIPLE_BYTES);
    point_bytes(mesh.vertices().iter().copied(), &mut bytes);
    write_file(&paths.vertices, &bytes)?;

    bytes.clear();
    for tri in mesh.triangles() {
        for &ix in tri {
            bytes.extend_from_slice(&ix.to_le_bytes());
        }
    }
    write_file(&paths.triangles, &bytes)?;

    bytes.clear();
    point_bytes(batch.segments().iter().map(|s| s.start), &mut bytes);
    write_file(&paths.rays_from, &bytes)?;

    bytes.clear();
    point_bytes(batch.segments().iter().map(|s| s.end), &mut bytes);
    write_file(&paths.rays_to, &bytes)?;
    Ok(())
}

/// Encodes a result in its mode's binary format.
pub fn result_bytes(result: &HitResult) -> Vec<u8> {
    match result {
        HitResult::Boolean(bits) => bits.iter().map(|&b| b as u8).collect(),
        HitResult::InterceptCount(counts) => {
            let mut out = Vec::with_capacity(counts.len() * 4);
            for c in counts {
                out.extend_from_slice(&c.to_le_bytes());
            }
            out
        }
        HitResult::Barycentric(hits) => {
            let mut out = Vec::with_capacity(hits.len() * BARYCENTRIC_RECORD_BYTES);
            for i in 0..hits.len() {
                out.extend_from_slice(&hits.segment_ids[i].to_le_bytes());
                out.extend_from_slice(&hits.distances[i].to_le_bytes());
                out.extend_from_slice(&hits.triangle_ids[i].to_le_bytes());
                out.extend_from_slice(&hits.points[i].x.to_le_bytes());
                out.extend_from_slice(&hits.points[i].y.to_le_bytes());
                out.extend_from_slice(&hits.points[i].z.to_le_bytes());
            }
            out
        }
    }
}

/// Writes a result file.
pub fn save_results(result: &HitResult, path: &Path) -> Result<(), LoadError> {
    write_file(path, &result_bytes(result))
}

/// Reads a result file back; the mode determines the record format.
pub fn load_results(path: &Path, mode: QueryMode) -> Result<HitResult, LoadError> {
    let bytes = read_file(path)?;
    match mode {
        QueryMode::Boolean => Ok(HitResult::Boolean(bytes.iter().map(|&b| b != 0).collect())),
        QueryMode::InterceptCount => {
            let n = check_divisible(path, bytes.len(), 4)?;
            let mut counts = Vec::with_capacity(n);
            for chunk in bytes.chunks_exact(4) {
                counts.push(u32::from_le_bytes(chunk.try_into().unwrap()));
            }
            Ok(HitResult::InterceptCount(counts))
        }
        QueryMode::Barycentric => {
            let n = check_divisible(path, bytes.len(), BARYCENTRIC_RECORD_BYTES)?;
            let mut hits = BarycentricHits::default();
            for i in 0..n {
                let r = &bytes[i * BARYCENTRIC_RECORD_BYTES..];
                hits.segment_ids
                    .push(u32::from_le_bytes(r[0..4].try_into().unwrap()));
                hits.distances
                    .push(f32::from_le_bytes(r[4..8].try_into().unwrap()));
                hits.triangle_ids
                    .push(u32::from_le_bytes(r[8..12].try_into().unwrap()));
                hits.points.push(Point3::new(
                    f32::from_le_bytes(r[12..16].try_into().unwrap()),
                    f32::from_le_bytes(r[16..20].try_into().unwrap()),
                    f32::from_le_bytes(r[20..24].try_into().unwrap()),
                ));
            }
            Ok(HitResult::Barycentric(hits))
        }
    }
}
