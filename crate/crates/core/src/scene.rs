//! Built-in test scenes and the synthetic terrain generator used for
//! benchmarks and randomized cross-checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Mesh, Point3, Segment, SegmentBatch};

/// The four-triangle, eight-segment scene used throughout the test suite.
///
/// Segments 1, 2, 4 and 7 intersect triangles 0, 1, 2 and 3 at
/// (12.7, 2.2, 1.14), (12.9, 2.4, 1.21), (12.6, 2.9, 1.23) and
/// (12.2, 2.4, 1.08) respectively; the other four segments miss (one
/// passes above the surface, one stops below it, one lies outside the
/// extent and one threads the gap between triangles).
pub fn simple_scene() -> (Mesh, SegmentBatch) {
    let p = Point3::new;
    // Three dedicated vertices per triangle (12 total); coordinates are
    // shared by value where triangles touch.
    let vertices = vec![
        // triangle 0
        p(12.0, 2.0, 1.0),
        p(13.0, 2.0, 1.2),
        p(12.5, 2.5, 1.1),
        // triangle 1
        p(12.5, 2.5, 1.1),
        p(13.0, 2.0, 1.2),
        p(13.0, 3.0, 1.3),
        // triangle 2
        p(12.0, 3.0, 1.225),
        p(13.0, 2.5, 1.1),
        p(13.0, 3.0, 1.3),
        // triangle 3
        p(12.0, 2.0, 1.0),
        p(12.5, 2.7, 1.14),
        p(12.0, 3.0, 1.2),
    ];
    let triangles = vec![[0, 1, 2], [3, 4, 5], [6, 7, 8], [9, 10, 11]];
    let mesh = Mesh::new(vertices, triangles).expect("fixture mesh is valid");

    let segments = vec![
        Segment::new(p(12.35, 2.30, 1.5), p(12.35, 2.30, 2.5)), // above the surface
        Segment::new(p(12.70, 2.20, 0.0), p(12.70, 2.20, 2.0)), // hits triangle 0
        Segment::new(p(12.90, 2.40, 0.0), p(12.90, 2.40, 2.0)), // hits triangle 1
        Segment::new(p(12.60, 2.35, 0.2), p(12.60, 2.35, 0.9)), // stops below the surface
        Segment::new(p(12.60, 2.90, 0.0), p(12.60, 2.90, 2.0)), // hits triangle 2
        Segment::new(p(11.50, 1.50, 0.0), p(11.50, 1.50, 2.0)), // outside the extent
        Segment::new(p(12.48, 2.74, 0.0), p(12.48, 2.74, 2.0)), // gap between triangles
        Segment::new(p(12.20, 2.40, 0.0), p(12.20, 2.40, 2.0)), // hits triangle 3
    ];
    let batch = SegmentBatch::new(segments).expect("fixture segments are valid");
    (mesh, batch)
}

/// The simple scene plus two patches floating above triangles 1 and 2,
/// forming a two-layer canopy. A vertical segment through the double
/// cover crosses the surface twice.
pub fn canopy_scene() -> (Mesh, SegmentBatch) {
    let (mesh, batch) = simple_scene();
    let p = Point3::new;
    let mut vertices = mesh.vertices().to_vec();
    let mut triangles = mesh.triangles().to_vec();

    // Patch above triangle 1.
    let base = vertices.len() as u32;
    vertices.extend([p(12.5, 2.5, 1.6), p(13.0, 2.0, 1.7), p(13.0, 3.0, 1.8)]);
    triangles.push([base, base + 1, base + 2]);

    // Patch above triangle 2.
    let base = vertices.len() as u32;
    vertices.extend([p(12.0, 3.0, 1.725), p(13.0, 2.5, 1.6), p(13.0, 3.0, 1.8)]);
    triangles.push([base, base + 1, base + 2]);

    let mesh = Mesh::new(vertices, triangles).expect("canopy mesh is valid");
    (mesh, batch)
}

/// Shape of the synthetic terrain and its query segments.
#[derive(Clone, Debug)]
pub struct SurfaceParams {
    /// Vertices along x; the mesh has `(grid_w - 1) * (grid_h - 1) * 2`
    /// triangles.
    pub grid_w: u32,
    /// Vertices along y.
    pub grid_h: u32,
    /// Extent of the terrain along x, in world units.
    pub size_x: f32,
    /// Extent along y.
    pub size_y: f32,
    /// Mean terrain height.
    pub base_z: f32,
    /// Peak-to-trough undulation amplitude.
    pub amplitude: f32,
    /// Fraction of segments generated to straddle the surface; the rest
    /// pass entirely above or entirely below it.
    pub hit_fraction: f32,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        SurfaceParams {
            grid_w: 122,
            grid_h: 122,
            size_x: 1000.0,
            size_y: 1000.0,
            base_z: 60.0,
            amplitude: 2.0,
            hit_fraction: 0.5,
        }
    }
}

/// Deterministically generates an undulating terrain plus a batch of
/// query segments. The same seed always yields the same scene.
pub fn synthesize_scene(n_rays: usize, params: &SurfaceParams, seed: u64) -> (Mesh, SegmentBatch) {
    assert!(
        params.grid_w >= 2 && params.grid_h >= 2,
        "grid must be at least 2x2"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Seeded undulation: a couple of incommensurate sinusoids.
    let fx1: f32 = rng.random_range(1.0..3.0);
    let fy1: f32 = rng.random_range(1.0..3.0);
    let fx2: f32 = rng.random_range(3.0..6.0);
    let fy2: f32 = rng.random_range(3.0..6.0);
    let phase1: f32 = rng.random_range(0.0..std::f32::consts::TAU);
    let phase2: f32 = rng.random_range(0.0..std::f32::consts::TAU);

    let (w, h) = (params.grid_w as usize, params.grid_h as usize);
    let mut vertices = Vec::with_capacity(w * h);
    let mut min_z = f32::INFINITY;
    let mut max_z = f32::NEG_INFINITY;
    for j in 0..h {
        for i in 0..w {
            let u = i as f32 / (w - 1) as f32;
            let v = j as f32 / (h - 1) as f32;
            let swell = (std::f32::consts::TAU * fx1 * u + phase1).sin()
                * (std::f32::consts::TAU * fy1 * v + phase1).cos();
            let ripple = 0.35
                * (std::f32::consts::TAU * fx2 * u + phase2).sin()
                * (std::f32::consts::TAU * fy2 * v + phase2).sin();
            let z = params.base_z + params.amplitude * (swell + ripple);
            min_z = min_z.min(z);
            max_z = max_z.max(z);
            vertices.push(Point3::new(u * params.size_x, v * params.size_y, z));
        }
    }

    let mut triangles = Vec::with_capacity((w - 1) * (h - 1) * 2);
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let a = (j * w + i) as u32;
            let b = a + 1;
            let c = a + w as u32 + 1;
            let d = a + w as u32;
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mesh = Mesh::new(vertices, triangles).expect("synthesized mesh is valid");

    // Segments: xy positions jitter by about a cell so traversal crosses
    // a handful of leaves; z placement decides hit vs miss.
    let cell = (params.size_x / (w - 1) as f32).max(params.size_y / (h - 1) as f32);
    let clearance = params.amplitude.max(1.0);
    let mut segments = Vec::with_capacity(n_rays);
    for _ in 0..n_rays {
        let x = rng.random_range(0.0..params.size_x);
        let y = rng.random_range(0.0..params.size_y);
        let x2 = (x + rng.random_range(-2.0 * cell..2.0 * cell)).clamp(0.0, params.size_x);
        let y2 = (y + rng.random_range(-2.0 * cell..2.0 * cell)).clamp(0.0, params.size_y);

        let straddle = rng.random_range(0.0..1.0) < params.hit_fraction;
        let (z0, z1) = if straddle {
            (
                rng.random_range(min_z - 5.0 * clearance..min_z - clearance),
                rng.random_range(max_z + clearance..max_z + 5.0 * clearance),
            )
        } else if rng.random_range(0.0..1.0) < 0.5 {
            // entirely above
            (
                rng.random_range(max_z + clearance..max_z + 3.0 * clearance),
                rng.random_range(max_z + 3.0 * clearance..max_z + 6.0 * clearance),
            )
        } else {
            // entirely below
            (
                rng.random_range(min_z - 6.0 * clearance..min_z - 3.0 * clearance),
                rng.random_range(min_z - 3.0 * clearance..min_z - clearance),
            )
        };

        // Half the rays point downward.
        let seg = if rng.random_range(0.0..1.0) < 0.5 {
            Segment::new(Point3::new(x, y, z0), Point3::new(x2, y2, z1))
        } else {
            Segment::new(Point3::new(x2, y2, z1), Point3::new(x, y, z0))
        };
        segments.push(seg);
    }
    let batch = SegmentBatch::new(segments).expect("synthesized segments are valid");
    (mesh, batch)
}
