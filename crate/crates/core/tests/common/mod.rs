//! Shared test support: an independent segment-triangle intersection
//! oracle built on plane clipping and edge half-plane tests.
#![allow(dead_code)] // each test target uses a different subset
//!
//! This oracle deliberately shares no code with the Moller-Trumbore
//! predicate it cross-checks: it computes the triangle plane, clips the
//! segment against it and then tests the crossing point against the
//! three edge half-planes, entirely in f64.

use segmesh::geometry::{Point3, Segment};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleVerdict {
    Hit {
        t: f64,
    },
    Miss,
    /// The decision rests on a quantity too close to a boundary for the
    /// verdict to be meaningful at the configured margin.
    Marginal,
}

impl OracleVerdict {
    pub fn is_hit(&self) -> bool {
        matches!(self, OracleVerdict::Hit { .. })
    }

    pub fn is_definite(&self) -> bool {
        !matches!(self, OracleVerdict::Marginal)
    }
}

fn sub(a: Point3, b: Point3) -> [f64; 3] {
    [
        a.x as f64 - b.x as f64,
        a.y as f64 - b.y as f64,
        a.z as f64 - b.z as f64,
    ]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Clipping-based intersection verdict with relative margin `margin`.
///
/// Decisions closer to a boundary than `margin` (relative to the scale
/// of the quantity deciding them) come back as `Marginal`.
pub fn clipping_oracle(
    seg: &Segment,
    v0: Point3,
    v1: Point3,
    v2: Point3,
    margin: f64,
) -> OracleVerdict {
    let e1 = sub(v1, v0);
    let e2 = sub(v2, v0);
    let n = cross(e1, e2);
    let n_len = norm(n);
    let edge_scale = norm(e1).max(norm(e2));
    if n_len <= margin * edge_scale * edge_scale {
        // Degenerate triangle; the predicate under test reports no hit.
        return if n_len == 0.0 {
            OracleVerdict::Miss
        } else {
            OracleVerdict::Marginal
        };
    }

    // Signed plane distances of the two endpoints.
    let s0 = dot(n, sub(seg.start, v0));
    let s1 = dot(n, sub(seg.end, v0));
    let denom = s0 - s1;
    let dist_scale = s0
        .abs()
        .max(s1.abs())
        .max(n_len * norm(sub(seg.end, seg.start)));
    if denom.abs() <= margin * dist_scale {
        // Parallel or coplanar: the predicate treats these as misses,
        // but only clearly separated planes are a definite verdict.
        return if s0.abs() > margin * dist_scale {
            OracleVerdict::Miss
        } else {
            OracleVerdict::Marginal
        };
    }

    let t = s0 / denom;
    if !(0.0..=1.0).contains(&t) {
        let boundary_distance = (-t).max(t - 1.0);
        return if boundary_distance > margin {
            OracleVerdict::Miss
        } else {
            OracleVerdict::Marginal
        };
    }
    let near_parametric_edge = t.min(1.0 - t) <= margin;

    // Crossing point, then three half-plane tests around the triangle.
    let d = sub(seg.end, seg.start);
    let p = [
        seg.start.x as f64 + t * d[0],
        seg.start.y as f64 + t * d[1],
        seg.start.z as f64 + t * d[2],
    ];
    let verts = [v0, v1, v2];
    let mut clearly_outside = false;
    let mut near_edge = false;
    for i in 0..3 {
        let a = verts[i];
        let b = verts[(i + 1) % 3];
        let edge = sub(b, a);
        let to_p = [p[0] - a.x as f64, p[1] - a.y as f64, p[2] - a.z as f64];
        let side = dot(cross(edge, to_p), n);
        let scale = norm(edge) * (norm(to_p) + norm(edge)) * n_len;
        if side < -margin * scale {
            clearly_outside = true;
        } else if side <= margin * scale {
            near_edge = true;
        }
    }

    if clearly_outside {
        // One decisive half-plane rejection settles it, even when the
        // point is near another edge's line.
        OracleVerdict::Miss
    } else if near_edge || near_parametric_edge {
        // A grazing crossing: hit-or-miss depends on sub-margin detail.
        OracleVerdict::Marginal
    } else {
        OracleVerdict::Hit { t }
    }
}
