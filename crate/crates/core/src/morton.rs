//! Morton (Z-order) encoding of triangle centroids and the spatial sort
//! that clusters nearby triangles before tree construction.
//!
//! Codes are 64-bit with 21 bits per axis; x occupies the most significant
//! interleave slot, then y, then z. The top bit is always zero. Triangle
//! indices are 32-bit everywhere: the sorted permutation deliberately uses
//! the same width as the triangle ids stored in the tree and in dataset
//! files, so no narrowing or widening happens across module boundaries.

use crate::geometry::{Aabb, Mesh, Point3};

/// Bits per axis in a 64-bit three-axis code.
pub const MORTON_BITS_PER_AXIS: u32 = 21;
/// Largest quantized coordinate value (2^21 - 1).
pub const MORTON_COORD_MAX: u32 = (1 << MORTON_BITS_PER_AXIS) - 1;

/// 64-bit interleaved spatial key. Ordering codes orders points along a
/// Z-curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MortonCode(pub u64);

/// Per-axis quantized coordinates, each strictly below 2^21.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantizedCoord {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

/// The Morton-sorted triangle ordering.
///
/// `permutation[i]` is the original triangle id occupying sorted slot `i`;
/// `sorted_codes[i]` is that triangle's code. The permutation is a
/// bijection on `0..n_triangles` and the codes are non-decreasing.
#[derive(Clone, Debug)]
pub struct SortedOrder {
    pub permutation: Vec<u32>,
    pub sorted_codes: Vec<MortonCode>,
}

impl SortedOrder {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }
}

/// Spreads the low 21 bits of `c` so that bit k lands at bit 3k.
pub fn expand_bits(c: u32) -> u64 {
    debug_assert!(c <= MORTON_COORD_MAX);
    let mut x = c as u64 & 0x1f_ffff;
    x = (x | x << 32) & 0x001f_0000_0000_ffff;
    x = (x | x << 16) & 0x1f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

/// Interleaves the three 21-bit axes into one code, x-major.
pub fn morton_encode(q: QuantizedCoord) -> MortonCode {
    MortonCode(expand_bits(q.x) << 2 | expand_bits(q.y) << 1 | expand_bits(q.z))
}

/// Maps `p` affinely from `extent` to the integer lattice `[0, 2^21 - 1]`
/// per axis, clamping out-of-range points. Zero-width axes map to 0.
pub fn quantize_point(p: Point3, extent: &Aabb) -> QuantizedCoord {
    QuantizedCoord {
        x: quantize_axis(p.x, extent.min.x, extent.max.x),
        y: quantize_axis(p.y, extent.min.y, extent.max.y),
        z: quantize_axis(p.z, extent.min.z, extent.max.z),
    }
}

fn quantize_axis(value: f32, min: f32, max: f32) -> u32 {
    if max <= min {
        return 0;
    }
    // f64 keeps the scale-then-floor deterministic and monotone; a 21-bit
    // product sits too close to f32's 24-bit mantissa for comfort.
    let normalized = ((value as f64 - min as f64) / (max as f64 - min as f64)).clamp(0.0, 1.0);
    (normalized * MORTON_COORD_MAX as f64).floor() as u32
}

/// Arithmetic mean of the three vertices of triangle `tid`.
pub fn triangle_centroid(mesh: &Mesh, tid: u32) -> Point3 {
    let [a, b, c] = mesh.triangle_vertices(tid);
    Point3::new(
        (a.x + b.x + c.x) / 3.0,
        (a.y + b.y + c.y) / 3.0,
        (a.z + b.z + c.z) / 3.0,
    )
}

/// Encodes every triangle centroid against `extent` and stably sorts the
/// triangle ids by code. Equal codes keep their original relative order,
/// so the output is deterministic.
pub fn build_sorted_order(mesh: &Mesh, extent: &Aabb) -> SortedOrder {
    let n = mesh.n_triangles();
    let codes: Vec<MortonCode> = (0..n as u32)
        .map(|tid| morton_encode(quantize_point(triangle_centroid(mesh, tid), extent)))
        .collect();

    let mut permutation: Vec<u32> = (0..n as u32).collect();
    permutation.sort_by_key(|&tid| codes[tid as usize]);

    let sorted_codes = permutation.iter().map(|&tid| codes[tid as usize]).collect();
    SortedOrder {
        permutation,
        sorted_codes,
    }
}
