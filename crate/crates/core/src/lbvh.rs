//! Binary radix tree construction over Morton-sorted triangles, plus the
//! integrity validator.
//!
//! The tree occupies two arrays of `n_triangles` nodes each. Leaves hold
//! one triangle apiece in sorted order. Internal slot `k` (for
//! `k < n_triangles - 1`) is the node whose children split between sorted
//! leaves `k` and `k+1`; the final internal slot is a sentinel that only
//! stores the root reference in `child_l`. Construction is bottom-up:
//! every leaf ascends, the first path to arrive at an internal node
//! records its contribution and stops, and the second arrival merges the
//! child boxes and continues toward the root.

use std::fmt;

use crate::geometry::{Aabb, Mesh};
use crate::morton::{MortonCode, SortedOrder};

/// Typed reference into the two node arrays. Diagnostics print these as
/// `(kind, index)` pairs instead of raw addresses so dumps are
/// reproducible across runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Internal(u32),
    Leaf(u32),
    Null,
}

impl NodeRef {
    pub fn is_null(self) -> bool {
        matches!(self, NodeRef::Null)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Internal(i) => write!(f, "internal {i}"),
            NodeRef::Leaf(i) => write!(f, "leaf {i}"),
            NodeRef::Null => write!(f, "null"),
        }
    }
}

/// One tree node. Leaves and internal slots share this record; unused
/// fields stay at their reset values (`triangle_id` on internals, ranges
/// on the sentinel).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub triangle_id: u32,
    pub range_l: i32,
    pub range_r: i32,
    pub arrivals: u8,
    pub child_l: NodeRef,
    pub child_r: NodeRef,
    pub parent: NodeRef,
}

impl BvhNode {
    fn zeroed() -> Self {
        BvhNode {
            bounds: Aabb::ZERO,
            triangle_id: 0,
            range_l: 0,
            range_r: -1,
            arrivals: 0,
            child_l: NodeRef::Null,
            child_r: NodeRef::Null,
            parent: NodeRef::Null,
        }
    }
}

/// The bounding volume hierarchy: `n_triangles` internal slots (the last
/// one is the sentinel holding the root link) and `n_triangles` leaves,
/// plus the sorted order the leaves follow.
#[derive(Clone, Debug)]
pub struct Bvh {
    pub internal: Vec<BvhNode>,
    pub leaves: Vec<BvhNode>,
    pub order: SortedOrder,
}

impl Bvh {
    pub fn n_triangles(&self) -> usize {
        self.leaves.len()
    }

    /// Index of the sentinel slot in the internal array.
    pub fn sentinel_index(&self) -> usize {
        self.internal.len() - 1
    }

    /// The root reference stored by the sentinel; `Null` when
    /// construction never reached the top.
    pub fn root(&self) -> NodeRef {
        self.internal[self.sentinel_index()].child_l
    }

    pub fn node(&self, r: NodeRef) -> Option<&BvhNode> {
        match r {
            NodeRef::Internal(i) => self.internal.get(i as usize),
            NodeRef::Leaf(i) => self.leaves.get(i as usize),
            NodeRef::Null => None,
        }
    }
}

/// Allocates and initializes the node arrays without linking them.
///
/// Leaf `i` receives `triangle_id = order.permutation[i]` and that
/// triangle's bounding box; every internal slot is zeroed with no
/// arrivals and null references.
pub fn bvh_reset(mesh: &Mesh, order: SortedOrder) -> Bvh {
    let n = order.len();
    assert!(n >= 1, "BVH construction requires at least one triangle");
    assert_eq!(n, mesh.n_triangles(), "sorted order does not match mesh");

    let mut leaves = Vec::with_capacity(n);
    for (i, &tid) in order.permutation.iter().enumerate() {
        let mut leaf = BvhNode::zeroed();
        leaf.triangle_id = tid;
        leaf.bounds = mesh.triangle_aabb(tid);
        leaf.range_l = i as i32;
        leaf.range_r = i as i32;
        leaves.push(leaf);
    }

    Bvh {
        internal: vec![BvhNode::zeroed(); n],
        leaves,
        order,
    }
}

/// Length of the common prefix of `codes[i]` and `codes[j]`, or -1 when
/// `j` falls outside the array.
///
/// Equal codes are disambiguated by appending the 32-bit leaf indices:
/// the result becomes 64 plus the common prefix of `i` and `j`, so no two
/// leaves ever compare fully equal and duplicate-centroid meshes still
/// build.
pub fn delta(i: i64, j: i64, codes: &[MortonCode]) -> i32 {
    if j < 0 || j >= codes.len() as i64 {
        return -1;
    }
    let ci = codes[i as usize].0;
    let cj = codes[j as usize].0;
    if ci == cj {
        return 64 + ((i as u32) ^ (j as u32)).leading_zeros() as i32;
    }
    (ci ^ cj).leading_zeros() as i32
}

/// Links every node bottom-up and stores the root in the sentinel.
/// Worker coverage is derived from the leaf count itself, so no leaf can
/// be skipped by a mis-sized partition.
pub fn bvh_construct(bvh: &mut Bvh) {
    let n = bvh.leaves.len();
    bvh_construct_partial(bvh, n);
}

/// Fault-injection variant of [`bvh_construct`] that ascends from only
/// the first `leaf_count` leaves. Stopping short of the full leaf count
/// leaves half-filled internal nodes, untouched slots and a null root for
/// the validator to flag; production code always goes through
/// [`bvh_construct`].
pub fn bvh_construct_partial(bvh: &mut Bvh, leaf_count: usize) {
    let n = bvh.leaves.len() as i64;
    let sentinel = bvh.sentinel_index();
    let codes: Vec<MortonCode> = bvh.order.sorted_codes.clone();

    for leaf in 0..leaf_count.min(n as usize) {
        let mut node = NodeRef::Leaf(leaf as u32);
        let (mut l, mut r) = (leaf as i64, leaf as i64);

        loop {
            if l == 0 && r == n - 1 {
                bvh.internal[sentinel].child_l = node;
                break;
            }

            // Merge toward the boundary with the longer common prefix
            // (Apetrei's parent rule). The boundary index goes second:
            // delta range-checks its second argument.
            let delta_l = delta(l, l - 1, &codes);
            let delta_r = delta(r, r + 1, &codes);

            let (parent, arrived_as_left) = if delta_l > delta_r {
                (l - 1, false)
            } else {
                (r, true)
            };
            let parent_ix = parent as usize;

            if arrived_as_left {
                bvh.internal[parent_ix].child_l = node;
                bvh.internal[parent_ix].range_l = l as i32;
            } else {
                bvh.internal[parent_ix].child_r = node;
                bvh.internal[parent_ix].range_r = r as i32;
            }
            set_parent(bvh, node, NodeRef::Internal(parent as u32));
            bvh.internal[parent_ix].arrivals += 1;

            if bvh.internal[parent_ix].arrivals < 2 {
                // First arrival: the sibling path completes this node.
                break;
            }

            let merged = {
                let p = &bvh.internal[parent_ix];
                let left = bvh.node(p.child_l).expect("left child set");
                let right = bvh.node(p.child_r).expect("right child set");
                left.bounds.union(&right.bounds)
            };
            bvh.internal[parent_ix].bounds = merged;

            l = bvh.internal[parent_ix].range_l as i64;
            r = bvh.internal[parent_ix].range_r as i64;
            node = NodeRef::Internal(parent as u32);
        }
    }
}

fn set_parent(bvh: &mut Bvh, node: NodeRef, parent: NodeRef) {
    match node {
        NodeRef::Internal(i) => bvh.internal[i as usize].parent = parent,
        NodeRef::Leaf(i) => bvh.leaves[i as usize].parent = parent,
        NodeRef::Null => unreachable!("ascending from a null node"),
    }
}

/// Convenience: Morton-sort the mesh and build the full tree.
pub fn build_bvh(mesh: &Mesh) -> Result<Bvh, crate::error::DataError> {
    if mesh.n_triangles() == 0 {
        return Err(crate::error::DataError::NoTriangles);
    }
    let extent = mesh.surface_extent()?;
    let order = crate::morton::build_sorted_order(mesh, &extent);
    let mut bvh = bvh_reset(mesh, order);
    bvh_construct(&mut bvh);
    Ok(bvh)
}

/// A single integrity violation found by [`bvh_validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// The sentinel's root link was never written.
    NullRoot,
    /// A triangle id appears in more than one leaf.
    DuplicateTriangleId { triangle_id: u32 },
    /// A triangle id never appears in any leaf.
    MissingTriangleId { triangle_id: u32 },
    /// A leaf carries an id outside `0..n_triangles`.
    TriangleIdOutOfRange { leaf: u32, triangle_id: u32 },
    /// An internal node was entered by exactly one child path.
    HalfFilledInternal { index: u32 },
    /// An internal node was never entered at all.
    UntouchedInternal { index: u32 },
    /// An internal node counted more than two arrivals.
    OverfilledInternal { index: u32, arrivals: u8 },
    /// Used-node count differs from `n_triangles - 1`.
    UsedCountMismatch { used: usize, expected: usize },
    /// A child's parent link does not point back at the node that owns it.
    ParentLinkMismatch { node: NodeRef, child: NodeRef },
    /// The root's parent should be null.
    RootParentNotNull,
    /// An internal node's box is not the exact union of its children's.
    BoxUnionMismatch { index: u32 },
    /// An internal node's leaf range does not partition into its
    /// children's ranges.
    RangeMismatch { index: u32 },
    /// A leaf's range is not `[own index, own index]`.
    LeafRangeMismatch { leaf: u32 },
    /// The root does not cover the full leaf range.
    RootRangeMismatch { range_l: i32, range_r: i32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NullRoot => write!(f, "sentinel holds a null root link"),
            Violation::DuplicateTriangleId { triangle_id } => {
                write!(f, "triangle {triangle_id} appears in more than one leaf")
            }
            Violation::MissingTriangleId { triangle_id } => {
                write!(f, "triangle {triangle_id} is missing from the leaves")
            }
            Violation::TriangleIdOutOfRange { leaf, triangle_id } => {
                write!(
                    f,
                    "leaf {leaf} holds out-of-range triangle id {triangle_id}"
                )
            }
            Violation::HalfFilledInternal { index } => {
                write!(f, "internal {index} is half-filled (arrivals == 1)")
            }
            Violation::UntouchedInternal { index } => {
                write!(f, "internal {index} was never reached (arrivals == 0)")
            }
            Violation::OverfilledInternal { index, arrivals } => {
                write!(f, "internal {index} counted {arrivals} arrivals")
            }
            Violation::UsedCountMismatch { used, expected } => {
                write!(f, "{used} internal nodes used, expected {expected}")
            }
            Violation::ParentLinkMismatch { node, child } => {
                write!(f, "{child} does not link back to its parent {node}")
            }
            Violation::RootParentNotNull => write!(f, "root node has a non-null parent"),
            Violation::BoxUnionMismatch { index } => {
                write!(
                    f,
                    "internal {index} box differs from the union of its children"
                )
            }
            Violation::RangeMismatch { index } => {
                write!(
                    f,
                    "internal {index} range does not match its children's ranges"
                )
            }
            Violation::LeafRangeMismatch { leaf } => {
                write!(f, "leaf {leaf} range is not [{leaf},{leaf}]")
            }
            Violation::RootRangeMismatch { range_l, range_r } => {
                write!(
                    f,
                    "root covers [{range_l},{range_r}] instead of the full leaf range"
                )
            }
        }
    }
}

/// Everything [`bvh_validate`] found. An empty list means the tree is
/// structurally sound.
#[derive(Clone, Debug, Default)]
pub struct IntegrityReport {
    pub violations: Vec<Violation>,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_half_filled(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::HalfFilledInternal { .. }))
    }

    pub fn has_untouched(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::UntouchedInternal { .. }))
    }

    pub fn has_null_root(&self) -> bool {
        self.violations.contains(&Violation::NullRoot)
    }
}

impl fmt::Display for IntegrityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "BVH integrity: clean");
        }
        writeln!(f, "BVH integrity: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Decodes the whole tree and reports every structural violation:
/// leaf-id bijection, arrival counts, used-node count, root link,
/// mutual parent/child links, exact child-box unions and leaf-range
/// partition. Safe to run on half-built trees.
pub fn bvh_validate(bvh: &Bvh) -> IntegrityReport {
    let mut report = IntegrityReport::default();
    let n = bvh.leaves.len();
    let sentinel = bvh.sentinel_index();

    // (a) Leaf triangle ids must be exactly {0, .., n-1}.
    let mut id_count = vec![0u32; n];
    for (leaf, node) in bvh.leaves.iter().enumerate() {
        if (node.triangle_id as usize) < n {
            id_count[node.triangle_id as usize] += 1;
        } else {
            report.violations.push(Violation::TriangleIdOutOfRange {
                leaf: leaf as u32,
                triangle_id: node.triangle_id,
            });
        }
        if node.range_l != leaf as i32 || node.range_r != leaf as i32 {
            report
                .violations
                .push(Violation::LeafRangeMismatch { leaf: leaf as u32 });
        }
    }
    for (tid, &count) in id_count.iter().enumerate() {
        if count == 0 {
            report.violations.push(Violation::MissingTriangleId {
                triangle_id: tid as u32,
            });
        } else if count > 1 {
            report.violations.push(Violation::DuplicateTriangleId {
                triangle_id: tid as u32,
            });
        }
    }

    // (b)+(c) Arrival counters over the non-sentinel internal slots.
    let mut used = 0usize;
    for (ix, node) in bvh.internal.iter().enumerate().take(sentinel) {
        match node.arrivals {
            0 => report
                .violations
                .push(Violation::UntouchedInternal { index: ix as u32 }),
            1 => report
                .violations
                .push(Violation::HalfFilledInternal { index: ix as u32 }),
            2 => used += 1,
            a => report.violations.push(Violation::OverfilledInternal {
                index: ix as u32,
                arrivals: a,
            }),
        }
    }
    if used != n - 1 {
        report.violations.push(Violation::UsedCountMismatch {
            used,
            expected: n - 1,
        });
    }

    // (d) Root link.
    let root = bvh.root();
    if root.is_null() {
        report.violations.push(Violation::NullRoot);
        return report;
    }
    if let Some(root_node) = bvh.node(root) {
        if !root_node.parent.is_null() {
            report.violations.push(Violation::RootParentNotNull);
        }
        if root_node.range_l != 0 || root_node.range_r != n as i32 - 1 {
            report.violations.push(Violation::RootRangeMismatch {
                range_l: root_node.range_l,
                range_r: root_node.range_r,
            });
        }
    }

    // (e)-(g) Link symmetry, exact box unions and range partitions on
    // every completed internal node.
    for (ix, node) in bvh.internal.iter().enumerate().take(sentinel) {
        if node.arrivals != 2 {
            continue;
        }
        let self_ref = NodeRef::Internal(ix as u32);
        let (Some(left), Some(right)) = (bvh.node(node.child_l), bvh.node(node.child_r)) else {
            report.violations.push(Violation::ParentLinkMismatch {
                node: self_ref,
                child: NodeRef::Null,
            });
            continue;
        };
        for (child_ref, child) in [(node.child_l, left), (node.child_r, right)] {
            if child.parent != self_ref {
                report.violations.push(Violation::ParentLinkMismatch {
                    node: self_ref,
                    child: child_ref,
                });
            }
        }
        if left.bounds.union(&right.bounds) != node.bounds {
            report
                .violations
                .push(Violation::BoxUnionMismatch { index: ix as u32 });
        }
        let contiguous = left.range_r + 1 == right.range_l
            && left.range_l == node.range_l
            && right.range_r == node.range_r;
        if !contiguous {
            report
                .violations
                .push(Violation::RangeMismatch { index: ix as u32 });
        }
    }

    report
}
