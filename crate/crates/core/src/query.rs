//! Batched intersection queries: BVH traversal gathers collision
//! candidates per segment, the intersection predicate filters them, and
//! mode-specific post-processing shapes the output.
//!
//! Every per-segment step runs on an immutable mesh and tree, so the
//! batch is partitioned freely across worker threads. When a segment's
//! candidate list overflows its fixed capacity the query falls back to an
//! exhaustive scan for that segment, so results stay exact at any
//! capacity.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::error::DataError;
use crate::geometry::{Aabb, Hit, Mesh, Point3, Segment, SegmentBatch};
use crate::lbvh::{self, Bvh, IntegrityReport, NodeRef};
use crate::morton;

/// Default capacity of a per-segment collision candidate list.
pub const DEFAULT_CANDIDATE_CAPACITY: usize = 32;
/// Capacity of the per-segment unique-crossing buffer; counts saturate
/// here.
pub const INTERCEPT_CAPACITY: usize = 32;
/// Fixed traversal worklist size. Descent depth depends on the Morton
/// key length, not on the triangle count, so 64 slots cover any input.
pub const TRAVERSAL_STACK_DEPTH: usize = 64;

/// Query operating mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryMode {
    /// One bit per segment: does it intersect the surface at all?
    Boolean,
    /// Nearest hit per intersecting segment with distance and location.
    Barycentric,
    /// Number of unique surface crossings per segment.
    InterceptCount,
}

/// Batch query configuration.
#[derive(Clone, Debug)]
pub struct QueryConfig {
    pub mode: QueryMode,
    /// Evaluate intersection arithmetic in 64-bit floats.
    pub high_precision: bool,
    /// Capacity of the per-segment candidate list (at least 1).
    pub candidate_capacity: usize,
    /// Crossings whose parametric positions differ by no more than this
    /// fraction of the segment length count as one unique intersection.
    pub dedup_tolerance: f32,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            mode: QueryMode::Boolean,
            high_precision: false,
            candidate_capacity: DEFAULT_CANDIDATE_CAPACITY,
            dedup_tolerance: 1e-6,
        }
    }
}

impl QueryConfig {
    pub fn for_mode(mode: QueryMode) -> Self {
        QueryConfig {
            mode,
            ..Default::default()
        }
    }
}

/// Fixed-capacity list of candidate triangle ids gathered by traversal.
#[derive(Clone, Debug)]
pub struct CollisionList {
    entries: Box<[u32]>,
    count: u16,
    overflowed: bool,
}

impl CollisionList {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.clamp(1, u16::MAX as usize);
        CollisionList {
            entries: vec![0; capacity].into_boxed_slice(),
            count: 0,
            overflowed: false,
        }
    }

    pub fn push(&mut self, triangle_id: u32) {
        if (self.count as usize) < self.entries.len() {
            self.entries[self.count as usize] = triangle_id;
            self.count += 1;
        } else {
            self.overflowed = true;
        }
    }

    pub fn ids(&self) -> &[u32] {
        &self.entries[..self.count as usize]
    }

    pub fn count(&self) -> u16 {
        self.count
    }

    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    pub fn overflowed(&self) -> bool {
        self.overflowed
    }

    fn mark_overflowed(&mut self) {
        self.overflowed = true;
    }
}

/// Fixed-capacity buffer of deduplicated crossing distances.
#[derive(Clone, Debug)]
pub struct InterceptDistances {
    values: Box<[f32]>,
    count: u16,
    overflowed: bool,
}

impl InterceptDistances {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.clamp(1, u16::MAX as usize);
        InterceptDistances {
            values: vec![0.0; capacity].into_boxed_slice(),
            count: 0,
            overflowed: false,
        }
    }

    pub fn push(&mut self, distance: f32) {
        if (self.count as usize) < self.values.len() {
            self.values[self.count as usize] = distance;
            self.count += 1;
        } else {
            self.overflowed = true;
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values[..self.count as usize]
    }

    pub fn count(&self) -> u16 {
        self.count
    }

    pub fn overflowed(&self) -> bool {
        self.overflowed
    }
}

/// Nearest-hit record as produced by traversal, before distances and
/// points are derived.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NearestHit {
    pub segment_id: u32,
    pub t: f32,
    pub triangle_id: u32,
}

/// Sparse nearest-hit output: parallel arrays over the intersecting
/// segments only, ordered by segment id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BarycentricHits {
    pub segment_ids: Vec<u32>,
    pub distances: Vec<f32>,
    pub triangle_ids: Vec<u32>,
    pub points: Vec<Point3>,
}

impl BarycentricHits {
    pub fn len(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segment_ids.is_empty()
    }
}

/// Per-mode query output.
#[derive(Clone, Debug, PartialEq)]
pub enum HitResult {
    Boolean(Vec<bool>),
    Barycentric(BarycentricHits),
    InterceptCount(Vec<u32>),
}

/// Counters accumulated while answering a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Total Moller-Trumbore invocations across the batch.
    pub mt_tests: u64,
    /// Segments that fell back to an exhaustive scan.
    pub overflowed_segments: u64,
}

impl QueryStats {
    fn merge(self, o: QueryStats) -> QueryStats {
        QueryStats {
            mt_tests: self.mt_tests + o.mt_tests,
            overflowed_segments: self.overflowed_segments + o.overflowed_segments,
        }
    }
}

/// Collects the triangle ids whose leaf boxes overlap `query`, up to
/// `capacity`. Uses an explicit descent worklist; on worklist or list
/// overflow the result is flagged so callers fall back to an exhaustive
/// scan.
pub fn find_candidates(bvh: &Bvh, query: &Aabb, capacity: usize) -> CollisionList {
    let mut list = CollisionList::with_capacity(capacity);
    let root = bvh.root();
    if root.is_null() {
        list.mark_overflowed();
        return list;
    }

    let mut stack = [NodeRef::Null; TRAVERSAL_STACK_DEPTH];
    stack[0] = root;
    let mut top = 1usize;

    while top > 0 {
        top -= 1;
        let node_ref = stack[top];
        let Some(node) = bvh.node(node_ref) else {
            continue;
        };
        if !node.bounds.overlaps(query) {
            continue;
        }
        match node_ref {
            NodeRef::Leaf(_) => list.push(node.triangle_id),
            NodeRef::Internal(_) => {
                for child in [node.child_l, node.child_r] {
                    if child.is_null() {
                        continue;
                    }
                    if top == TRAVERSAL_STACK_DEPTH {
                        list.mark_overflowed();
                    } else {
                        stack[top] = child;
                        top += 1;
                    }
                }
            }
            NodeRef::Null => {}
        }
    }
    list
}

struct SegmentTally {
    mt_tests: u64,
    overflowed: bool,
}

/// Runs the predicate over a segment's candidates (or over the whole mesh
/// on overflow) and feeds each confirmed hit to `visit`. Returns the test
/// tally. `visit` returning false stops the scan early.
fn visit_segment_hits(
    mesh: &Mesh,
    bvh: &Bvh,
    seg: &Segment,
    seg_box: &Aabb,
    cfg: &QueryConfig,
    visit: &mut impl FnMut(Hit) -> bool,
) -> SegmentTally {
    let mut tally = SegmentTally {
        mt_tests: 0,
        overflowed: false,
    };
    let candidates = find_candidates(bvh, seg_box, cfg.candidate_capacity);
    if candidates.overflowed() {
        tally.overflowed = true;
        for tid in 0..mesh.n_triangles() as u32 {
            tally.mt_tests += 1;
            if let Some(hit) = mesh.intersect_triangle(tid, seg, cfg.high_precision) {
                if !visit(hit) {
                    break;
                }
            }
        }
    } else {
        for &tid in candidates.ids() {
            tally.mt_tests += 1;
            if let Some(hit) = mesh.intersect_triangle(tid, seg, cfg.high_precision) {
                if !visit(hit) {
                    break;
                }
            }
        }
    }
    tally
}

/// One bit per segment: set iff the segment hits at least one triangle.
pub fn query_boolean(
    mesh: &Mesh,
    bvh: &Bvh,
    segments: &SegmentBatch,
    cfg: &QueryConfig,
) -> Vec<bool> {
    query_boolean_with_stats(mesh, bvh, segments, cfg).0
}

pub fn query_boolean_with_stats(
    mesh: &Mesh,
    bvh: &Bvh,
    segments: &SegmentBatch,
    cfg: &QueryConfig,
) -> (Vec<bool>, QueryStats) {
    let boxes: Vec<Aabb> = segments.segments().iter().map(Segment::aabb).collect();
    query_boolean_prebounded(mesh, bvh, segments, &boxes, cfg)
}

fn query_boolean_prebounded(
    mesh: &Mesh,
    bvh: &Bvh,
    segments: &SegmentBatch,
    boxes: &[Aabb],
    cfg: &QueryConfig,
) -> (Vec<bool>, QueryStats) {
    let per_segment: Vec<(bool, QueryStats)> = segments
        .segments()
        .par_iter()
        .zip(boxes)
        .map(|(seg, sbox)| {
            let mut any = false;
            let tally = visit_segment_hits(mesh, bvh, seg, sbox, cfg, &mut |_| {
                any = true;
                false // first hit settles the answer
            });
            (
                any,
                QueryStats {
                    mt_tests: tally.mt_tests,
                    overflowed_segments: tally.overflowed as u64,
                },
            )
        })
        .collect();

    let bits = per_segment.iter().map(|(b, _)| *b).collect();
    let stats = per_segment
        .iter()
        .map(|(_, s)| *s)
        .fold(QueryStats::default(), QueryStats::merge);
    (bits, stats)
}

/// Raw nearest hits (minimum `t`, ties to the lowest triangle id),
/// ordered by segment id. Non-intersecting segments are omitted.
pub fn nearest_hits(
    mesh: &Mesh,
    bvh: &Bvh,
    segments: &SegmentBatch,
    cfg: &QueryConfig,
) -> (Vec<NearestHit>, QueryStats) {
    let boxes: Vec<Aabb> = segments.segments().iter().map(Segment::aabb).collect();
    nearest_hits_prebounded(mesh, bvh, segments, &boxes, cfg)
}

fn nearest_hits_prebounded(
    mesh: &Mesh,
    bvh: &Bvh,
    segments: &SegmentBatch,
    boxes: &[Aabb],
    cfg: &QueryConfig,
) -> (Vec<NearestHit>, QueryStats) {
    let per_segment: Vec<(Option<NearestHit>, QueryStats)> = segments
        .segments()
        .par_iter()
        .zip(boxes)
        .enumerate()
        .map(|(i, (seg, sbox))| {
            let mut best: Option<(f32, u32)> = None;
            let tally = visit_segment_hits(mesh, bvh, seg, sbox, cfg, &mut |hit| {
                let cand = (hit.t, hit.triangle_id);
                best = Some(match best {
                    Some(b) if b <= cand => b,
                    _ => cand,
                });
                true
            });
            let record = best.map(|(t, triangle_id)| NearestHit {
                segment_id: i as u32,
                t,
                triangle_id,
            });
            (
                record,
                QueryStats {
                    mt_tests: tally.mt_tests,
                    overflowed_segments: tally.overflowed as u64,
                },
            )
        })
        .collect();

    let hits = per_segment.iter().filter_map(|(h, _)| *h).collect();
    let stats = per_segment
        .iter()
        .map(|(_, s)| *s)
        .fold(QueryStats::default(), QueryStats::merge);
    (hits, stats)
}

/// Derives Euclidean hit distances for a batch of nearest-hit records in
/// parallel.
pub fn compute_intersection_distances(segments: &SegmentBatch, hits: &[NearestHit]) -> Vec<f32> {
    let segs = segments.segments();
    hits.par_iter()
        .map(|h| h.t * segs[h.segment_id as usize].length())
        .collect()
}

/// Derives world-space hit points for a batch of nearest-hit records in
/// parallel.
pub fn compute_intersection_points(segments: &SegmentBatch, hits: &[NearestHit]) -> Vec<Point3> {
    let segs = segments.segments();
    hits.par_iter()
        .map(|h| {
            let seg = &segs[h.segment_id as usize];
            seg.start + (seg.end - seg.start) * h.t
        })
        .collect()
}

/// Nearest-hit query: distance, triangle and location per intersecting
/// segment.
pub fn query_barycentric(
    mesh: &Mesh,
    bvh: &Bvh,
    segments: &SegmentBatch,
    cfg: &QueryConfig,
) -> BarycentricHits {
    let (hits, _) = nearest_hits(mesh, bvh, segments, cfg);
    assemble_barycentric(segments, &hits)
}

fn assemble_barycentric(segments: &SegmentBatch, hits: &[NearestHit]) -> BarycentricHits {
    BarycentricHits {
        segment_ids: hits.iter().map(|h| h.segment_id).collect(),
        distances: compute_intersection_distances(segments, hits),
        triangle_ids: hits.iter().map(|h| h.triangle_id).collect(),
        points: compute_intersection_points(segments, hits),
    }
}

/// Counts unique crossings per segment after distance deduplication.
pub fn query_intercept_count(
    mesh: &Mesh,
    bvh: &Bvh,
    segments: &SegmentBatch,
    cfg: &QueryConfig,
) -> Vec<u32> {
    let boxes: Vec<Aabb> = segments.segments().iter().map(Segment::aabb).collect();
    query_intercept_prebounded(mesh, bvh, segments, &boxes, cfg).0
}

fn query_intercept_prebounded(
    mesh: &Mesh,
    bvh: &Bvh,
    segments: &SegmentBatch,
    boxes: &[Aabb],
    cfg: &QueryConfig,
) -> (Vec<u32>, QueryStats) {
    let per_segment: Vec<(u32, QueryStats)> = segments
        .segments()
        .par_iter()
        .zip(boxes)
        .map(|(seg, sbox)| {
            let mut ts: Vec<f32> = Vec::new();
            let tally = visit_segment_hits(mesh, bvh, seg, sbox, cfg, &mut |hit| {
                ts.push(hit.t);
                true
            });
            let count = count_unique_crossings(&mut ts, seg, cfg.dedup_tolerance);
            (
                count,
                QueryStats {
                    mt_tests: tally.mt_tests,
                    overflowed_segments: tally.overflowed as u64,
                },
            )
        })
        .collect();

    let counts = per_segment.iter().map(|(c, _)| *c).collect();
    let stats = per_segment
        .iter()
        .map(|(_, s)| *s)
        .fold(QueryStats::default(), QueryStats::merge);
    (counts, stats)
}

/// Sorts the raw parametric hits and greedily clusters values within the
/// tolerance, so crossings through a shared edge or vertex count once.
/// The representative distances accumulate in an [`InterceptDistances`]
/// buffer whose capacity saturates the count.
fn count_unique_crossings(ts: &mut [f32], seg: &Segment, dedup_tolerance: f32) -> u32 {
    if ts.is_empty() {
        return 0;
    }
    ts.sort_by(f32::total_cmp);
    let length = seg.length();
    let mut unique = InterceptDistances::with_capacity(INTERCEPT_CAPACITY);
    let mut cluster_rep = ts[0];
    unique.push(cluster_rep * length);
    for &t in ts.iter().skip(1) {
        if t - cluster_rep > dedup_tolerance {
            cluster_rep = t;
            unique.push(cluster_rep * length);
        }
    }
    unique.count() as u32
}

/// Stage wall-clock breakdown of one pipeline run. The `io` slot is
/// filled in by callers that load or store datasets around the run.
#[derive(Clone, Copy, Debug, Default)]
pub struct TimingBreakdown {
    pub extent: Duration,
    pub ray_bounds: Duration,
    pub morton_sort: Duration,
    pub bvh_build: Duration,
    pub traversal: Duration,
    pub post_processing: Duration,
    pub io: Duration,
}

impl TimingBreakdown {
    /// Stage names paired with their durations, in execution order.
    pub fn stages(&self) -> [(&'static str, Duration); 7] {
        [
            ("extent", self.extent),
            ("ray-bounds", self.ray_bounds),
            ("morton+sort", self.morton_sort),
            ("bvh-build", self.bvh_build),
            ("traversal", self.traversal),
            ("post-processing", self.post_processing),
            ("io", self.io),
        ]
    }
}

impl std::fmt::Display for TimingBreakdown {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, d) in self.stages() {
            writeln!(f, "  {name:<16} {:>10.3} ms", d.as_secs_f64() * 1e3)?;
        }
        Ok(())
    }
}

/// Everything a pipeline run produces.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub result: HitResult,
    pub timings: TimingBreakdown,
    pub stats: QueryStats,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("BVH integrity check failed: {report}")]
    Integrity { report: IntegrityReport },
}

/// Runs the full flow: surface extent, per-segment bounds, Morton sort,
/// tree reset and construction (with an integrity check), traversal and
/// mode-specific post-processing. Deterministic for identical inputs.
pub fn run_pipeline(
    mesh: &Mesh,
    segments: &SegmentBatch,
    cfg: &QueryConfig,
) -> Result<PipelineOutput, PipelineError> {
    if mesh.n_triangles() == 0 {
        return Err(DataError::NoTriangles.into());
    }
    let mut timings = TimingBreakdown::default();

    let t0 = Instant::now();
    let extent = mesh.surface_extent()?;
    timings.extent = t0.elapsed();

    let t0 = Instant::now();
    let boxes: Vec<Aabb> = segments.segments().par_iter().map(Segment::aabb).collect();
    timings.ray_bounds = t0.elapsed();

    let t0 = Instant::now();
    let order = morton::build_sorted_order(mesh, &extent);
    timings.morton_sort = t0.elapsed();

    let t0 = Instant::now();
    let mut bvh = lbvh::bvh_reset(mesh, order);
    lbvh::bvh_construct(&mut bvh);
    let report = lbvh::bvh_validate(&bvh);
    timings.bvh_build = t0.elapsed();
    if !report.is_clean() {
        return Err(PipelineError::Integrity { report });
    }

    let (result, stats) = match cfg.mode {
        QueryMode::Boolean => {
            let t0 = Instant::now();
            let (bits, stats) = query_boolean_prebounded(mesh, &bvh, segments, &boxes, cfg);
            timings.traversal = t0.elapsed();
            (HitResult::Boolean(bits), stats)
        }
        QueryMode::Barycentric => {
            let t0 = Instant::now();
            let (hits, stats) = nearest_hits_prebounded(mesh, &bvh, segments, &boxes, cfg);
            timings.traversal = t0.elapsed();

            let t0 = Instant::now();
            let assembled = assemble_barycentric(segments, &hits);
            timings.post_processing = t0.elapsed();
            (HitResult::Barycentric(assembled), stats)
        }
        QueryMode::InterceptCount => {
            let t0 = Instant::now();
            let (counts, stats) = query_intercept_prebounded(mesh, &bvh, segments, &boxes, cfg);
            timings.traversal = t0.elapsed();
            (HitResult::InterceptCount(counts), stats)
        }
    };

    Ok(PipelineOutput {
        result,
        timings,
        stats,
    })
}
