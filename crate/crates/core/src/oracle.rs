//! Exhaustive reference engine: every segment against every triangle.
//!
//! This module applies the same mode semantics as the accelerated query
//! path (nearest hit, distance deduplication, capacity saturation) but
//! shares none of its traversal machinery, so the two can check each
//! other. It reuses only the intersection predicate itself. Slow by
//! design.

use rayon::prelude::*;

use crate::geometry::{intersection_distance, intersection_point, Mesh, SegmentBatch};
use crate::query::{BarycentricHits, HitResult, QueryConfig, QueryMode, INTERCEPT_CAPACITY};

/// Answers the batch by testing all `n_triangles` triangles per segment.
pub fn brute_force(mesh: &Mesh, segments: &SegmentBatch, cfg: &QueryConfig) -> HitResult {
    match cfg.mode {
        QueryMode::Boolean => HitResult::Boolean(brute_boolean(mesh, segments, cfg)),
        QueryMode::Barycentric => HitResult::Barycentric(brute_barycentric(mesh, segments, cfg)),
        QueryMode::InterceptCount => {
            HitResult::InterceptCount(brute_intercept_count(mesh, segments, cfg))
        }
    }
}

fn brute_boolean(mesh: &Mesh, segments: &SegmentBatch, cfg: &QueryConfig) -> Vec<bool> {
    let n = mesh.n_triangles() as u32;
    segments
        .segments()
        .par_iter()
        .map(|seg| {
            (0..n).any(|tid| {
                mesh.intersect_triangle(tid, seg, cfg.high_precision)
                    .is_some()
            })
        })
        .collect()
}

fn brute_barycentric(mesh: &Mesh, segments: &SegmentBatch, cfg: &QueryConfig) -> BarycentricHits {
    let n = mesh.n_triangles() as u32;
    let per_segment: Vec<Option<(u32, f32, u32)>> = segments
        .segments()
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let mut best: Option<(f32, u32)> = None;
            for tid in 0..n {
                if let Some(hit) = mesh.intersect_triangle(tid, seg, cfg.high_precision) {
                    // Strict ordering keeps the lowest triangle id on ties
                    // because ids ascend.
                    if best.is_none_or(|b| (hit.t, tid) < b) {
                        best = Some((hit.t, tid));
                    }
                }
            }
            best.map(|(t, tid)| (i as u32, t, tid))
        })
        .collect();

    let mut out = BarycentricHits::default();
    for (segment_id, t, triangle_id) in per_segment.into_iter().flatten() {
        let seg = &segments.segments()[segment_id as usize];
        let hit = crate::geometry::Hit {
            t,
            u: 0.0,
            v: 0.0,
            triangle_id,
        };
        out.segment_ids.push(segment_id);
        out.distances.push(intersection_distance(seg, &hit));
        out.triangle_ids.push(triangle_id);
        out.points.push(intersection_point(seg, &hit));
    }
    out
}

fn brute_intercept_count(mesh: &Mesh, segments: &SegmentBatch, cfg: &QueryConfig) -> Vec<u32> {
    let n = mesh.n_triangles() as u32;
    segments
        .segments()
        .par_iter()
        .map(|seg| {
            let mut ts: Vec<f32> = (0..n)
                .filter_map(|tid| mesh.intersect_triangle(tid, seg, cfg.high_precision))
                .map(|hit| hit.t)
                .collect();
            if ts.is_empty() {
                return 0;
            }
            ts.sort_by(f32::total_cmp);
            let mut count = 1u32;
            let mut rep = ts[0];
            for &t in &ts[1..] {
                if t - rep > cfg.dedup_tolerance {
                    rep = t;
                    count += 1;
                }
            }
            count.min(INTERCEPT_CAPACITY as u32)
        })
        .collect()
}
