//! Fundamental geometric types and the segment-triangle intersection
//! predicate.
//!
//! All coordinates are 32-bit floats. The intersection predicate offers an
//! optional high-precision path that evaluates every intermediate dot and
//! cross product in 64-bit before rounding the result back; near-parallel
//! configurations are where the two paths can disagree.

use std::ops::{Add, Mul, Sub};

use crate::error::DataError;

/// Determinant cutoff below which a segment is treated as parallel to the
/// triangle plane (32-bit path).
pub const DET_EPSILON_F32: f32 = 1e-12;
/// Determinant cutoff for the 64-bit intersection path.
pub const DET_EPSILON_F64: f64 = 1e-15;

/// A point (or displacement) in world coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Point3 {
    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Point3) -> f32 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn length(self) -> f32 {
        self.dot(self).sqrt()
    }

    pub fn min_components(self, o: Point3) -> Point3 {
        Point3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_components(self, o: Point3) -> Point3 {
        Point3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Mul<f32> for Point3 {
    type Output = Point3;
    fn mul(self, s: f32) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A finite line segment. Zero-length segments are permitted; they
/// intersect nothing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: Point3,
    pub end: Point3,
}

impl Segment {
    pub const fn new(start: Point3, end: Point3) -> Self {
        Segment { start, end }
    }

    pub fn length(&self) -> f32 {
        (self.end - self.start).length()
    }

    /// Componentwise min/max of the two endpoints.
    pub fn aabb(&self) -> Aabb {
        Aabb {
            min: self.start.min_components(self.end),
            max: self.start.max_components(self.end),
        }
    }
}

/// A batch of query segments, validated to contain only finite coordinates.
#[derive(Clone, Debug)]
pub struct SegmentBatch {
    segments: Vec<Segment>,
}

impl SegmentBatch {
    pub fn new(segments: Vec<Segment>) -> Result<Self, DataError> {
        for (i, s) in segments.iter().enumerate() {
            if !s.start.is_finite() || !s.end.is_finite() {
                return Err(DataError::NonFinite {
                    context: "segment",
                    index: i,
                });
            }
        }
        Ok(SegmentBatch { segments })
    }

    /// Builds a batch from parallel start/end point arrays.
    pub fn from_endpoints(from: &[Point3], to: &[Point3]) -> Result<Self, DataError> {
        if from.len() != to.len() {
            return Err(DataError::EndpointCountMismatch {
                from: from.len(),
                to: to.len(),
            });
        }
        let segments = from
            .iter()
            .zip(to)
            .map(|(&start, &end)| Segment { start, end })
            .collect();
        SegmentBatch::new(segments)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }
}

/// Triangle mesh: a vertex table plus index triplets into it.
///
/// Construction validates that every coordinate is finite and every index
/// is in range. Degenerate (zero-area) triangles are accepted; the
/// intersection predicate reports no hit for them.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self, DataError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    context: "vertex",
                    index: i,
                });
            }
        }
        let n_vertices = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &ix in tri {
                if ix as usize >= n_vertices {
                    return Err(DataError::VertexIndexOutOfRange {
                        triangle: t,
                        vertex: ix,
                        n_vertices,
                    });
                }
            }
        }
        Ok(Mesh {
            vertices,
            triangles,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// The three corner points of triangle `tid`.
    pub fn triangle_vertices(&self, tid: u32) -> [Point3; 3] {
        let [a, b, c] = self.triangles[tid as usize];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Componentwise min/max of the three vertices of triangle `tid`.
    pub fn triangle_aabb(&self, tid: u32) -> Aabb {
        let [a, b, c] = self.triangle_vertices(tid);
        Aabb {
            min: a.min_components(b).min_components(c),
            max: a.max_components(b).max_components(c),
        }
    }

    /// Bounding box of every vertex in the mesh.
    pub fn surface_extent(&self) -> Result<Aabb, DataError> {
        let (first, rest) = self.vertices.split_first().ok_or(DataError::EmptyMesh)?;
        let mut extent = Aabb::from_point(*first);
        for &v in rest {
            extent.min = extent.min.min_components(v);
            extent.max = extent.max.max_components(v);
        }
        Ok(extent)
    }

    /// Runs the intersection predicate against triangle `tid`.
    pub fn intersect_triangle(&self, tid: u32, seg: &Segment, high_precision: bool) -> Option<Hit> {
        let [v0, v1, v2] = self.triangle_vertices(tid);
        moller_trumbore(seg, v0, v1, v2, tid, high_precision)
    }
}

/// Axis-aligned bounding box with `min.c <= max.c` on every axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// The all-zero box used for untouched BVH node slots.
    pub const ZERO: Aabb = Aabb {
        min: Point3::new(0.0, 0.0, 0.0),
        max: Point3::new(0.0, 0.0, 0.0),
    };

    pub fn from_point(p: Point3) -> Self {
        Aabb { min: p, max: p }
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min_components(o.min),
            max: self.max.max_components(o.max),
        }
    }

    /// Closed-interval overlap test: boxes sharing only a face, edge or
    /// corner still count as overlapping, so pruning never discards a
    /// boundary hit.
    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x
            && o.min.x <= self.max.x
            && self.min.y <= o.max.y
            && o.min.y <= self.max.y
            && self.min.z <= o.max.z
            && o.min.z <= self.max.z
    }

    /// True when `o` lies entirely inside `self` (closed intervals).
    pub fn contains(&self, o: &Aabb) -> bool {
        self.min.x <= o.min.x
            && self.min.y <= o.min.y
            && self.min.z <= o.min.z
            && self.max.x >= o.max.x
            && self.max.y >= o.max.y
            && self.max.z >= o.max.z
    }
}

/// One segment-triangle intersection: parametric position along the
/// segment plus barycentric coordinates.
///
/// `u` weights the second vertex, `v` the third, and `1 - u - v` the
/// first, so the hit point is `(1-u-v)*v0 + u*v1 + v*v2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f32,
    pub u: f32,
    pub v: f32,
    pub triangle_id: u32,
}

/// Segment-triangle intersection test (Moller-Trumbore).
///
/// Returns a hit iff the segment crosses the triangle within the closed
/// parametric range `[0, 1]` and the closed triangle (boundary touches
/// count). Degenerate triangles and parallel segments return `None`.
/// With `high_precision` set, all intermediate products are evaluated in
/// f64 before the result is rounded back to f32.
pub fn moller_trumbore(
    seg: &Segment,
    v0: Point3,
    v1: Point3,
    v2: Point3,
    triangle_id: u32,
    high_precision: bool,
) -> Option<Hit> {
    if high_precision {
        moller_trumbore_f64(seg, v0, v1, v2, triangle_id)
    } else {
        moller_trumbore_f32(seg, v0, v1, v2, triangle_id)
    }
}

fn moller_trumbore_f32(
    seg: &Segment,
    v0: Point3,
    v1: Point3,
    v2: Point3,
    triangle_id: u32,
) -> Option<Hit> {
    let dir = seg.end - seg.start;
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let pvec = dir.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < DET_EPSILON_F32 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = seg.start - v0;
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = dir.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if !(0.0..=1.0).contains(&t) {
        return None;
    }
    Some(Hit {
        t,
        u,
        v,
        triangle_id,
    })
}

#[derive(Clone, Copy)]
struct DVec {
    x: f64,
    y: f64,
    z: f64,
}

impl DVec {
    fn from(p: Point3) -> Self {
        DVec {
            x: p.x as f64,
            y: p.y as f64,
            z: p.z as f64,
        }
    }

    fn sub(self, o: DVec) -> DVec {
        DVec {
            x: self.x - o.x,
            y: self.y - o.y,
            z: self.z - o.z,
        }
    }

    fn dot(self, o: DVec) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    fn cross(self, o: DVec) -> DVec {
        DVec {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }
}

fn moller_trumbore_f64(
    seg: &Segment,
    v0: Point3,
    v1: Point3,
    v2: Point3,
    triangle_id: u32,
) -> Option<Hit> {
    let start = DVec::from(seg.start);
    let dir = DVec::from(seg.end).sub(start);
    let v0 = DVec::from(v0);
    let e1 = DVec::from(v1).sub(v0);
    let e2 = DVec::from(v2).sub(v0);
    let pvec = dir.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < DET_EPSILON_F64 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = start.sub(v0);
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = dir.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if !(0.0..=1.0).contains(&t) {
        return None;
    }
    Some(Hit {
        t: t as f32,
        u: u as f32,
        v: v as f32,
        triangle_id,
    })
}

/// The world-space point `start + t * (end - start)` for a hit.
pub fn intersection_point(seg: &Segment, hit: &Hit) -> Point3 {
    seg.start + (seg.end - seg.start) * hit.t
}

/// Euclidean distance from the segment start to the intersection point.
pub fn intersection_distance(seg: &Segment, hit: &Hit) -> f32 {
    hit.t * seg.length()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f32, y: f32, z: f32) -> Point3 {
        Point3::new(x, y, z)
    }

    // Triangle T0 of the four-triangle test scene; spans the region around
    // (12.7, 2.2, 1.14).
    const T0: [Point3; 3] = [
        Point3::new(12.0, 2.0, 1.0),
        Point3::new(13.0, 2.0, 1.2),
        Point3::new(12.5, 2.5, 1.1),
    ];

    #[test]
    fn vertical_segment_hits_slanted_triangle() {
        let seg = Segment::new(p(12.7, 2.2, 0.0), p(12.7, 2.2, 2.0));
        let hit = moller_trumbore(&seg, T0[0], T0[1], T0[2], 0, false).expect("hit");
        let point = intersection_point(&seg, &hit);
        assert!((point.x - 12.7).abs() < 1e-4);
        assert!((point.y - 2.2).abs() < 1e-4);
        assert!((point.z - 1.14).abs() < 1e-4);
    }

    #[test]
    fn disjoint_planes_miss() {
        let seg = Segment::new(p(0.0, 0.0, 0.0), p(1.0, 1.0, 0.0));
        let hit = moller_trumbore(
            &seg,
            p(0.0, 0.0, 1.0),
            p(1.0, 0.0, 1.0),
            p(0.0, 1.0, 1.0),
            0,
            false,
        );
        assert!(hit.is_none());
    }

    #[test]
    fn degenerate_triangle_misses() {
        let seg = Segment::new(p(0.5, 0.5, -1.0), p(0.5, 0.5, 1.0));
        // All three vertices collinear: zero area.
        let hit = moller_trumbore(
            &seg,
            p(0.0, 0.0, 0.0),
            p(1.0, 1.0, 0.0),
            p(2.0, 2.0, 0.0),
            0,
            false,
        );
        assert!(hit.is_none());
    }

    #[test]
    fn zero_length_segment_misses() {
        let seg = Segment::new(p(0.3, 0.3, 0.0), p(0.3, 0.3, 0.0));
        let hit = moller_trumbore(
            &seg,
            p(0.0, 0.0, 0.0),
            p(1.0, 0.0, 0.0),
            p(0.0, 1.0, 0.0),
            0,
            false,
        );
        assert!(hit.is_none());
    }

    #[test]
    fn endpoint_touch_counts_as_hit() {
        // Segment ends exactly on the triangle plane (t = 1).
        let seg = Segment::new(p(0.25, 0.25, -1.0), p(0.25, 0.25, 0.0));
        let hit = moller_trumbore(
            &seg,
            p(0.0, 0.0, 0.0),
            p(1.0, 0.0, 0.0),
            p(0.0, 1.0, 0.0),
            0,
            false,
        )
        .expect("touching endpoint registers");
        assert_eq!(hit.t, 1.0);
    }

    #[test]
    fn intersection_point_endpoints_and_midpoint() {
        let seg = Segment::new(p(0.0, 0.0, 0.0), p(2.0, 4.0, 6.0));
        let hit = |t| Hit {
            t,
            u: 0.0,
            v: 0.0,
            triangle_id: 0,
        };
        assert_eq!(intersection_point(&seg, &hit(0.0)), seg.start);
        assert_eq!(intersection_point(&seg, &hit(1.0)), seg.end);
        assert_eq!(intersection_point(&seg, &hit(0.5)), p(1.0, 2.0, 3.0));
    }

    #[test]
    fn intersection_distance_endpoints() {
        let seg = Segment::new(p(0.0, 0.0, 0.0), p(3.0, 4.0, 0.0));
        let hit = |t| Hit {
            t,
            u: 0.0,
            v: 0.0,
            triangle_id: 0,
        };
        assert_eq!(intersection_distance(&seg, &hit(0.0)), 0.0);
        assert_eq!(intersection_distance(&seg, &hit(1.0)), 5.0);
    }

    #[test]
    fn segment_aabb_componentwise() {
        let s = Segment::new(p(0.0, 0.0, 0.0), p(1.0, 1.0, 1.0));
        assert_eq!(
            s.aabb(),
            Aabb {
                min: p(0.0, 0.0, 0.0),
                max: p(1.0, 1.0, 1.0)
            }
        );

        let s = Segment::new(p(1.0, 0.0, 2.0), p(0.0, 3.0, 1.0));
        assert_eq!(
            s.aabb(),
            Aabb {
                min: p(0.0, 0.0, 1.0),
                max: p(1.0, 3.0, 2.0)
            }
        );

        let s = Segment::new(p(5.0, 5.0, 5.0), p(5.0, 5.0, 5.0));
        assert_eq!(s.aabb().min, s.aabb().max);
    }

    #[test]
    fn triangle_aabb_from_listing() {
        let mesh = Mesh::new(
            vec![p(12.0, 2.0, 1.0), p(13.0, 2.0, 1.0), p(12.0, 2.5, 1.2)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let b = mesh.triangle_aabb(0);
        assert_eq!(b.min, p(12.0, 2.0, 1.0));
        assert_eq!(b.max, p(13.0, 2.5, 1.2));
    }

    #[test]
    fn surface_extent_of_single_vertex_is_degenerate() {
        let mesh = Mesh::new(vec![p(1.0, 2.0, 3.0)], vec![]).unwrap();
        let e = mesh.surface_extent().unwrap();
        assert_eq!(e.min, e.max);
    }

    #[test]
    fn surface_extent_of_empty_mesh_is_an_error() {
        let mesh = Mesh::new(vec![], vec![]).unwrap();
        assert!(matches!(mesh.surface_extent(), Err(DataError::EmptyMesh)));
    }

    #[test]
    fn mesh_rejects_out_of_range_index() {
        let err = Mesh::new(vec![p(0.0, 0.0, 0.0)], vec![[0, 0, 99]]).unwrap_err();
        assert!(matches!(
            err,
            DataError::VertexIndexOutOfRange { vertex: 99, .. }
        ));
    }

    #[test]
    fn mesh_rejects_non_finite_vertex() {
        let err = Mesh::new(vec![p(f32::NAN, 0.0, 0.0)], vec![]).unwrap_err();
        assert!(matches!(err, DataError::NonFinite { .. }));
    }

    #[test]
    fn aabb_overlap_cases() {
        let a = Aabb {
            min: p(0.0, 0.0, 0.0),
            max: p(1.0, 1.0, 1.0),
        };
        assert!(a.overlaps(&a));

        let separated = Aabb {
            min: p(2.0, 0.0, 0.0),
            max: p(3.0, 1.0, 1.0),
        };
        assert!(!a.overlaps(&separated));
        assert!(!separated.overlaps(&a));

        // Sharing exactly one face plane counts (closed intervals).
        let touching = Aabb {
            min: p(1.0, 0.0, 0.0),
            max: p(2.0, 1.0, 1.0),
        };
        assert!(a.overlaps(&touching));
        assert!(touching.overlaps(&a));
    }
}
