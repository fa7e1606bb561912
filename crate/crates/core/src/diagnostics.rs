//! Tree inspection: flat word-stream serialization of the node arrays, a
//! layout-driven decoder, human-readable dumps and DOT graph output.
//!
//! Node references serialize as (kind, index) pairs rather than memory
//! addresses so that dumps and graphs are identical across runs. The
//! wire layout is data-driven: field offsets come from a
//! [`WireNodeLayout`] value, never from hardcoded byte positions.

use std::fmt::Write as _;

use thiserror::Error;

use crate::lbvh::{bvh_validate, Bvh, BvhNode, NodeRef};

/// Wire width of one index or id field, in bytes. Triangle ids, sorted
/// permutation entries and file record ids all share this width.
pub const INDEX_BYTES: usize = 4;

/// On-wire field value interpretation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldType {
    Real32,
    Int32,
    /// (kind tag, index) pair; two words.
    Ref,
}

impl FieldType {
    pub fn width_words(self) -> usize {
        match self {
            FieldType::Real32 | FieldType::Int32 => 1,
            FieldType::Ref => 2,
        }
    }
}

/// The node attributes a layout can place.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeField {
    MinX,
    MinY,
    MinZ,
    MaxX,
    MaxY,
    MaxZ,
    TriangleId,
    RangeL,
    RangeR,
    Arrivals,
    ChildL,
    ChildR,
    Parent,
}

impl NodeField {
    pub fn name(self) -> &'static str {
        match self {
            NodeField::MinX => "x_min",
            NodeField::MinY => "y_min",
            NodeField::MinZ => "z_min",
            NodeField::MaxX => "x_max",
            NodeField::MaxY => "y_max",
            NodeField::MaxZ => "z_max",
            NodeField::TriangleId => "triangleID",
            NodeField::RangeL => "rangeL",
            NodeField::RangeR => "rangeR",
            NodeField::Arrivals => "atomic",
            NodeField::ChildL => "childL",
            NodeField::ChildR => "childR",
            NodeField::Parent => "parent",
        }
    }

    pub fn ty(self) -> FieldType {
        match self {
            NodeField::MinX
            | NodeField::MinY
            | NodeField::MinZ
            | NodeField::MaxX
            | NodeField::MaxY
            | NodeField::MaxZ => FieldType::Real32,
            NodeField::TriangleId | NodeField::RangeL | NodeField::RangeR | NodeField::Arrivals => {
                FieldType::Int32
            }
            NodeField::ChildL | NodeField::ChildR | NodeField::Parent => FieldType::Ref,
        }
    }
}

/// One field's placement inside a serialized node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldDescriptor {
    pub field: NodeField,
    /// Offset in 32-bit words from the start of the node block.
    pub offset: usize,
}

/// Ordered field placements describing a flat serialized node.
#[derive(Clone, Debug)]
pub struct WireNodeLayout {
    fields: Vec<FieldDescriptor>,
    words_per_node: usize,
}

impl WireNodeLayout {
    /// Builds a layout, rejecting overlapping fields.
    pub fn new(fields: Vec<FieldDescriptor>) -> Result<Self, FormatError> {
        let mut words_per_node = 0;
        let mut occupied: Vec<(usize, usize)> = Vec::with_capacity(fields.len());
        for d in &fields {
            let end = d.offset + d.field.ty().width_words();
            for &(o, e) in &occupied {
                if d.offset < e && o < end {
                    return Err(FormatError::OverlappingFields {
                        field: d.field.name(),
                    });
                }
            }
            occupied.push((d.offset, end));
            words_per_node = words_per_node.max(end);
        }
        Ok(WireNodeLayout {
            fields,
            words_per_node,
        })
    }

    /// The layout used by the dump and CLI paths: bounds, triangle id,
    /// leaf range, arrival counter, then the three references.
    pub fn standard() -> Self {
        use NodeField::*;
        let order = [
            MinX, MinY, MinZ, MaxX, MaxY, MaxZ, TriangleId, RangeL, RangeR, Arrivals, ChildL,
            ChildR, Parent,
        ];
        let mut fields = Vec::with_capacity(order.len());
        let mut offset = 0;
        for field in order {
            fields.push(FieldDescriptor { field, offset });
            offset += field.ty().width_words();
        }
        WireNodeLayout::new(fields).expect("standard layout has no overlaps")
    }

    pub fn fields(&self) -> &[FieldDescriptor] {
        &self.fields
    }

    pub fn words_per_node(&self) -> usize {
        self.words_per_node
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("word stream holds {len} words, expected {n} nodes x {words} words = {}", n * words)]
    LengthMismatch { len: usize, n: usize, words: usize },
    #[error("unknown node reference tag {tag}")]
    BadRefTag { tag: u32 },
    #[error("field {field} overlaps another field")]
    OverlappingFields { field: &'static str },
}

const REF_NULL: u32 = 0;
const REF_INTERNAL: u32 = 1;
const REF_LEAF: u32 = 2;

fn encode_ref(r: NodeRef, out: &mut [u32]) {
    let (tag, index) = match r {
        NodeRef::Null => (REF_NULL, 0),
        NodeRef::Internal(i) => (REF_INTERNAL, i),
        NodeRef::Leaf(i) => (REF_LEAF, i),
    };
    out[0] = tag;
    out[1] = index;
}

fn decode_ref(words: &[u32]) -> Result<NodeRef, FormatError> {
    match words[0] {
        REF_NULL => Ok(NodeRef::Null),
        REF_INTERNAL => Ok(NodeRef::Internal(words[1])),
        REF_LEAF => Ok(NodeRef::Leaf(words[1])),
        tag => Err(FormatError::BadRefTag { tag }),
    }
}

fn encode_node(node: &BvhNode, layout: &WireNodeLayout, out: &mut [u32]) {
    for d in layout.fields() {
        let w = &mut out[d.offset..];
        match d.field {
            NodeField::MinX => w[0] = node.bounds.min.x.to_bits(),
            NodeField::MinY => w[0] = node.bounds.min.y.to_bits(),
            NodeField::MinZ => w[0] = node.bounds.min.z.to_bits(),
            NodeField::MaxX => w[0] = node.bounds.max.x.to_bits(),
            NodeField::MaxY => w[0] = node.bounds.max.y.to_bits(),
            NodeField::MaxZ => w[0] = node.bounds.max.z.to_bits(),
            NodeField::TriangleId => w[0] = node.triangle_id,
            NodeField::RangeL => w[0] = node.range_l as u32,
            NodeField::RangeR => w[0] = node.range_r as u32,
            NodeField::Arrivals => w[0] = node.arrivals as u32,
            NodeField::ChildL => encode_ref(node.child_l, w),
            NodeField::ChildR => encode_ref(node.child_r, w),
            NodeField::Parent => encode_ref(node.parent, w),
        }
    }
}

/// Serializes the internal array followed by the leaf array. The stream
/// holds `2 * n_triangles * words_per_node` words.
pub fn serialize_nodes(bvh: &Bvh, layout: &WireNodeLayout) -> Vec<u32> {
    let wpn = layout.words_per_node();
    let n = bvh.n_triangles();
    let mut stream = vec![0u32; 2 * n * wpn];
    for (i, node) in bvh.internal.iter().chain(bvh.leaves.iter()).enumerate() {
        encode_node(node, layout, &mut stream[i * wpn..(i + 1) * wpn]);
    }
    stream
}

/// A decoded field value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldValue {
    Real(f32),
    Int(i32),
    Ref(NodeRef),
}

/// One decoded node record: every layout field, interpreted.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeDump {
    pub index: u32,
    pub fields: Vec<(NodeField, FieldValue)>,
}

impl NodeDump {
    pub fn get(&self, field: NodeField) -> Option<FieldValue> {
        self.fields
            .iter()
            .find(|(f, _)| *f == field)
            .map(|(_, v)| *v)
    }

    pub fn int(&self, field: NodeField) -> Option<i32> {
        match self.get(field)? {
            FieldValue::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn real(&self, field: NodeField) -> Option<f32> {
        match self.get(field)? {
            FieldValue::Real(v) => Some(v),
            _ => None,
        }
    }

    pub fn node_ref(&self, field: NodeField) -> Option<NodeRef> {
        match self.get(field)? {
            FieldValue::Ref(r) => Some(r),
            _ => None,
        }
    }
}

impl std::fmt::Display for NodeDump {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use NodeField::*;
        // Bounds render as the familiar per-axis intervals when the
        // layout carries all six; other fields print name: value.
        let bounds = [MinX, MaxX, MinY, MaxY, MinZ, MaxZ].map(|fl| self.real(fl));
        if let [Some(x0), Some(x1), Some(y0), Some(y1), Some(z0), Some(z1)] = bounds {
            write!(
                f,
                "[{}] x:[{x0},{x1}], y:[{y0},{y1}], z:[{z0},{z1}]",
                self.index
            )?;
        } else {
            write!(f, "[{}]", self.index)?;
        }
        for (field, value) in &self.fields {
            if field.ty() == FieldType::Real32 {
                continue; // bounds already rendered
            }
            match value {
                FieldValue::Int(v) => write!(f, "\n    {}: {v}", field.name())?,
                FieldValue::Ref(r) => write!(f, "\n    {}: {r}", field.name())?,
                FieldValue::Real(v) => write!(f, "\n    {}: {v}", field.name())?,
            }
        }
        Ok(())
    }
}

/// Decodes `n` node blocks from a word stream. The stream length must be
/// exactly `n * words_per_node`.
pub fn decode_nodes(
    stream: &[u32],
    layout: &WireNodeLayout,
    n: usize,
) -> Result<Vec<NodeDump>, FormatError> {
    let wpn = layout.words_per_node();
    if stream.len() != n * wpn {
        return Err(FormatError::LengthMismatch {
            len: stream.len(),
            n,
            words: wpn,
        });
    }
    let mut dumps = Vec::with_capacity(n);
    for i in 0..n {
        let block = &stream[i * wpn..(i + 1) * wpn];
        let mut fields = Vec::with_capacity(layout.fields().len());
        for d in layout.fields() {
            let w = &block[d.offset..];
            let value = match d.field.ty() {
                FieldType::Real32 => FieldValue::Real(f32::from_bits(w[0])),
                FieldType::Int32 => FieldValue::Int(w[0] as i32),
                FieldType::Ref => FieldValue::Ref(decode_ref(w)?),
            };
            fields.push((d.field, value));
        }
        dumps.push(NodeDump {
            index: i as u32,
            fields,
        });
    }
    Ok(dumps)
}

/// Full human-readable dump: serialize both node arrays, decode them and
/// render internal nodes then leaves, ascending by index.
pub fn dump_tree(bvh: &Bvh) -> String {
    let layout = WireNodeLayout::standard();
    let stream = serialize_nodes(bvh, &layout);
    let n = bvh.n_triangles();
    let nodes = decode_nodes(&stream, &layout, 2 * n).expect("self-produced stream decodes");

    let mut out = String::new();
    out.push_str("BVH tree structure\n---------------------------\nInternal nodes\n");
    for dump in &nodes[..n] {
        let _ = writeln!(out, "{dump}");
    }
    out.push_str("---------------------------\nLeaf nodes\n");
    for dump in &nodes[n..] {
        let mut renumbered = dump.clone();
        renumbered.index -= n as u32;
        let _ = writeln!(out, "{renumbered}");
    }
    out
}

fn dot_ref_id(r: NodeRef) -> String {
    match r {
        NodeRef::Internal(i) => format!("i{i}"),
        NodeRef::Leaf(i) => format!("l{i}"),
        NodeRef::Null => "null".to_string(),
    }
}

/// Renders the tree in DOT. Internal nodes are ellipses labeled with
/// their leaf index range `[a,b]`; leaves are squares labeled `[c] d`
/// where `c` is the leaf index and `d` the triangle id; the sentinel
/// links to the root. Trees that fail validation are still rendered,
/// with the offending nodes annotated instead of aborting.
pub fn emit_dot(bvh: &Bvh) -> String {
    let report = bvh_validate(bvh);
    let sentinel = bvh.sentinel_index();

    let mut s = String::new();
    s.push_str("digraph bvh {\n");
    if !report.is_clean() {
        let _ = writeln!(
            s,
            "    label=\"INVALID TREE: {} violation(s)\";",
            report.violations.len()
        );
    }
    s.push_str("    node [shape=ellipse];\n");
    s.push_str("    sentinel [shape=diamond, label=\"sentinel\"];\n");

    for (ix, node) in bvh.internal.iter().enumerate().take(sentinel) {
        if node.arrivals == 0 {
            continue;
        }
        let annotation = if node.arrivals != 2 {
            format!(" (atomic: {})\", color=red", node.arrivals)
        } else {
            "\"".to_string()
        };
        let _ = writeln!(
            s,
            "    i{ix} [label=\"[{},{}]{annotation}];",
            node.range_l, node.range_r
        );
    }
    for (ix, leaf) in bvh.leaves.iter().enumerate() {
        let _ = writeln!(
            s,
            "    l{ix} [shape=box, label=\"[{ix}] {}\"];",
            leaf.triangle_id
        );
    }

    let root = bvh.root();
    if !root.is_null() {
        let _ = writeln!(s, "    sentinel -> {};", dot_ref_id(root));
    }
    for (ix, node) in bvh.internal.iter().enumerate().take(sentinel) {
        if node.arrivals == 0 {
            continue;
        }
        for child in [node.child_l, node.child_r] {
            if !child.is_null() {
                let _ = writeln!(s, "    i{ix} -> {};", dot_ref_id(child));
            }
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Point3};
    use crate::lbvh::{build_bvh, bvh_construct_partial, bvh_reset};
    use crate::morton::build_sorted_order;
    use crate::scene;

    fn fixture_bvh() -> Bvh {
        let (mesh, _) = scene::simple_scene();
        build_bvh(&mesh).unwrap()
    }

    #[test]
    fn roundtrip_preserves_every_field() {
        let bvh = fixture_bvh();
        let layout = WireNodeLayout::standard();
        let stream = serialize_nodes(&bvh, &layout);
        let n = bvh.n_triangles();
        assert_eq!(stream.len(), 2 * n * layout.words_per_node());

        let decoded = decode_nodes(&stream, &layout, 2 * n).unwrap();
        for (dump, node) in decoded.iter().zip(bvh.internal.iter().chain(&bvh.leaves)) {
            assert_eq!(dump.real(NodeField::MinX), Some(node.bounds.min.x));
            assert_eq!(dump.real(NodeField::MaxZ), Some(node.bounds.max.z));
            assert_eq!(
                dump.int(NodeField::TriangleId),
                Some(node.triangle_id as i32)
            );
            assert_eq!(dump.int(NodeField::RangeL), Some(node.range_l));
            assert_eq!(dump.int(NodeField::RangeR), Some(node.range_r));
            assert_eq!(dump.int(NodeField::Arrivals), Some(node.arrivals as i32));
            assert_eq!(dump.node_ref(NodeField::ChildL), Some(node.child_l));
            assert_eq!(dump.node_ref(NodeField::ChildR), Some(node.child_r));
            assert_eq!(dump.node_ref(NodeField::Parent), Some(node.parent));
        }
    }

    #[test]
    fn roundtrip_survives_a_permuted_layout() {
        use NodeField::*;
        // Same fields, scrambled offsets: decoding must not depend on
        // any hardcoded positions.
        let fields = vec![
            FieldDescriptor {
                field: Parent,
                offset: 0,
            },
            FieldDescriptor {
                field: Arrivals,
                offset: 2,
            },
            FieldDescriptor {
                field: MinX,
                offset: 3,
            },
            FieldDescriptor {
                field: MaxX,
                offset: 4,
            },
            FieldDescriptor {
                field: MinY,
                offset: 5,
            },
            FieldDescriptor {
                field: MaxY,
                offset: 6,
            },
            FieldDescriptor {
                field: MinZ,
                offset: 7,
            },
            FieldDescriptor {
                field: MaxZ,
                offset: 8,
            },
            FieldDescriptor {
                field: TriangleId,
                offset: 9,
            },
            FieldDescriptor {
                field: ChildL,
                offset: 10,
            },
            FieldDescriptor {
                field: ChildR,
                offset: 12,
            },
            FieldDescriptor {
                field: RangeL,
                offset: 14,
            },
            FieldDescriptor {
                field: RangeR,
                offset: 15,
            },
        ];
        let layout = WireNodeLayout::new(fields).unwrap();
        let bvh = fixture_bvh();
        let stream = serialize_nodes(&bvh, &layout);
        let decoded = decode_nodes(&stream, &layout, 2 * bvh.n_triangles()).unwrap();
        assert_eq!(decoded[1].int(NodeField::RangeR), Some(3));
        assert_eq!(
            decoded[1].node_ref(NodeField::ChildL),
            Some(NodeRef::Internal(0))
        );
    }

    #[test]
    fn overlapping_layout_is_rejected() {
        use NodeField::*;
        let fields = vec![
            FieldDescriptor {
                field: ChildL,
                offset: 0,
            },
            FieldDescriptor {
                field: Arrivals,
                offset: 1,
            },
        ];
        assert!(matches!(
            WireNodeLayout::new(fields),
            Err(FormatError::OverlappingFields { .. })
        ));
    }

    #[test]
    fn fixture_serializes_to_eight_blocks() {
        let bvh = fixture_bvh();
        let layout = WireNodeLayout::standard();
        let stream = serialize_nodes(&bvh, &layout);
        assert_eq!(stream.len() / layout.words_per_node(), 8);
    }

    #[test]
    fn zeroed_node_is_an_all_zero_block() {
        let node = BvhNode {
            bounds: Aabb::ZERO,
            triangle_id: 0,
            range_l: 0,
            range_r: 0,
            arrivals: 0,
            child_l: NodeRef::Null,
            child_r: NodeRef::Null,
            parent: NodeRef::Null,
        };
        let layout = WireNodeLayout::standard();
        let mut block = vec![0xffff_ffffu32; layout.words_per_node()];
        encode_node(&node, &layout, &mut block);
        assert!(block.iter().all(|&w| w == 0));
    }

    #[test]
    fn decoded_root_has_published_fields() {
        let bvh = fixture_bvh();
        let layout = WireNodeLayout::standard();
        let stream = serialize_nodes(&bvh, &layout);
        let decoded = decode_nodes(&stream, &layout, 2 * bvh.n_triangles()).unwrap();

        let root = &decoded[1];
        assert_eq!(root.int(NodeField::Arrivals), Some(2));
        assert_eq!(root.int(NodeField::RangeL), Some(0));
        assert_eq!(root.int(NodeField::RangeR), Some(3));
    }

    #[test]
    fn truncated_stream_is_a_format_error() {
        let bvh = fixture_bvh();
        let layout = WireNodeLayout::standard();
        let mut stream = serialize_nodes(&bvh, &layout);
        stream.pop();
        assert!(matches!(
            decode_nodes(&stream, &layout, 2 * bvh.n_triangles()),
            Err(FormatError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn half_built_tree_decodes_failure_signatures() {
        let (mesh, _) = scene::simple_scene();
        let extent = mesh.surface_extent().unwrap();
        let order = build_sorted_order(&mesh, &extent);
        let mut bvh = bvh_reset(&mesh, order);
        bvh_construct_partial(&mut bvh, 2);

        let layout = WireNodeLayout::standard();
        let stream = serialize_nodes(&bvh, &layout);
        let decoded = decode_nodes(&stream, &layout, 2 * bvh.n_triangles()).unwrap();

        let arrivals: Vec<i32> = decoded[..bvh.n_triangles()]
            .iter()
            .map(|d| d.int(NodeField::Arrivals).unwrap())
            .collect();
        assert!(
            arrivals.contains(&1),
            "expected a half-filled node: {arrivals:?}"
        );
        assert!(
            arrivals.contains(&0),
            "expected an untouched node: {arrivals:?}"
        );
    }

    #[test]
    fn dump_is_deterministic_and_sectioned() {
        let bvh = fixture_bvh();
        let a = dump_tree(&bvh);
        let b = dump_tree(&bvh);
        assert_eq!(a, b);
        assert!(a.contains("Internal nodes"));
        assert!(a.contains("Leaf nodes"));
        assert!(a.contains("rangeL: 0"));
        assert!(a.contains("childL: internal 1")); // sentinel holds the root
    }

    #[test]
    fn dot_fixture_labels() {
        let bvh = fixture_bvh();
        let dot = emit_dot(&bvh);
        assert!(dot.contains("i1 [label=\"[0,3]\"]"));
        assert!(dot.contains("l0 [shape=box, label=\"[0] 0\"]"));
        assert!(dot.contains("l1 [shape=box, label=\"[1] 3\"]"));
        assert!(dot.contains("l2 [shape=box, label=\"[2] 1\"]"));
        assert!(dot.contains("l3 [shape=box, label=\"[3] 2\"]"));
        assert!(dot.contains("sentinel -> i1;"));

        // used internals + leaves + sentinel
        let node_count = dot
            .lines()
            .filter(|l| l.contains("label=") && !l.contains("INVALID"))
            .count();
        assert_eq!(node_count, 3 + 4 + 1);
    }

    #[test]
    fn dot_single_triangle_links_sentinel_to_leaf() {
        let mesh = crate::geometry::Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = build_bvh(&mesh).unwrap();
        let dot = emit_dot(&bvh);
        assert!(dot.contains("sentinel -> l0;"));
        assert!(!dot.contains("i0 ->"));
    }

    #[test]
    fn dot_annotates_invalid_trees_instead_of_failing() {
        let (mesh, _) = scene::simple_scene();
        let extent = mesh.surface_extent().unwrap();
        let order = build_sorted_order(&mesh, &extent);
        let mut bvh = bvh_reset(&mesh, order);
        bvh_construct_partial(&mut bvh, 2);

        let dot = emit_dot(&bvh);
        assert!(dot.contains("INVALID TREE"));
        assert!(dot.starts_with("digraph"));
    }
}
