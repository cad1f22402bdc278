//! Assembles the per-document graph: directed D-LoS edges with polar
//! features, per-document distance normalization, and the symmetrized
//! adjacency used for message passing.

use crate::doc_model::{BBox, Document};
use crate::geometry::{self, Sector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("document has no segments")]
    EmptyDocument,
    #[error("malformed graph JSON: {0}")]
    MalformedJson(String),
}

/// One directed D-LoS edge with its polar features.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeature {
    pub src: usize,
    pub dst: usize,
    /// Raw box-gap distance in normalized units.
    pub d: f64,
    /// Log-smoothed distance, ln(d + 1).
    pub e_dis: f64,
    pub e_dir: Sector,
    /// Per-document min-max normalization of e_dis into [0, 1].
    pub r: f64,
}

/// Node payload carried in the graph file so training can run from graphs
/// alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: [i64; 4],
}

impl GraphNode {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.bbox[0], self.bbox[1], self.bbox[2], self.bbox[3])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentGraph {
    pub doc_id: String,
    pub nodes: Vec<GraphNode>,
    pub directed_edges: Vec<EdgeFeature>,
    /// Symmetrized, deduplicated neighbor lists (no self-loops), sorted.
    pub mp_adjacency: Vec<Vec<usize>>,
}

impl DocumentGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Polar features of a single directed pair.
pub fn edge_feature(
    src_bbox: &BBox,
    dst_bbox: &BBox,
) -> Result<(f64, f64, Sector), geometry::GeometryError> {
    let e_dir = geometry::direction_sector(src_bbox, dst_bbox)?;
    let d = geometry::rect_distance(src_bbox, dst_bbox);
    Ok((d, (d + 1.0).ln(), e_dir))
}

/// Build the full graph for a validated, normalized document.
pub fn build_graph(doc: &Document) -> Result<DocumentGraph, GraphError> {
    if doc.segments.is_empty() {
        return Err(GraphError::EmptyDocument);
    }
    let n = doc.segments.len();
    let mut directed_edges = Vec::new();
    for seg in &doc.segments {
        let dlos = geometry::dlos_neighbors(seg.id, doc);
        for sector in Sector::all() {
            if let Some((dst, d)) = dlos.neighbors[sector.index()] {
                directed_edges.push(EdgeFeature {
                    src: seg.id,
                    dst,
                    d,
                    e_dis: (d + 1.0).ln(),
                    e_dir: sector,
                    r: 0.0,
                });
            }
        }
    }
    let mut graph = DocumentGraph {
        doc_id: doc.doc_id.clone(),
        nodes: doc
            .segments
            .iter()
            .map(|s| GraphNode {
                id: s.id,
                text: s.text.clone(),
                bbox: [s.bbox.x1, s.bbox.y1, s.bbox.x2, s.bbox.y2],
            })
            .collect(),
        directed_edges,
        mp_adjacency: vec![Vec::new(); n],
    };
    normalize_r(&mut graph);
    graph.mp_adjacency = symmetrize(n, &graph.directed_edges);
    Ok(graph)
}

/// Per-document min-max normalization of e_dis into r. All-equal distances
/// (including single-edge graphs) map to r = 0 so no edge loses its weight.
pub fn normalize_r(graph: &mut DocumentGraph) {
    if graph.directed_edges.is_empty() {
        return;
    }
    let min = graph.directed_edges.iter().map(|e| e.e_dis).fold(f64::INFINITY, f64::min);
    let max = graph.directed_edges.iter().map(|e| e.e_dis).fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    for e in &mut graph.directed_edges {
        e.r = if span > 0.0 { (e.e_dis - min) / span } else { 0.0 };
    }
}

fn symmetrize(n: usize, edges: &[EdgeFeature]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.src].push(e.dst);
        adj[e.dst].push(e.src);
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

// --- serialization ---
//
// Float edge fields are rounded to 6 decimal places before writing, which
// makes serialize -> parse -> serialize byte-identical.

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: u32,
    doc_id: String,
    node_count: usize,
    nodes: Vec<GraphNode>,
    directed_edges: Vec<EdgeRecord>,
    mp_adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    src: usize,
    dst: usize,
    d: f64,
    e_dis: f64,
    e_dir: u8,
    r: f64,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn graph_to_json(graph: &DocumentGraph) -> Vec<u8> {
    let file = GraphFile {
        version: 1,
        doc_id: graph.doc_id.clone(),
        node_count: graph.node_count(),
        nodes: graph.nodes.clone(),
        directed_edges: graph
            .directed_edges
            .iter()
            .map(|e| EdgeRecord {
                src: e.src,
                dst: e.dst,
                d: round6(e.d),
                e_dis: round6(e.e_dis),
                e_dir: e.e_dir.index() as u8,
                r: round6(e.r),
            })
            .collect(),
        mp_adjacency: graph.mp_adjacency.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("graph serializes");
    bytes.push(b'\n');
    bytes
}

pub fn graph_from_json(raw: &[u8]) -> Result<DocumentGraph, GraphError> {
    let file: GraphFile =
        serde_json::from_slice(raw).map_err(|e| GraphError::MalformedJson(e.to_string()))?;
    let directed_edges = file
        .directed_edges
        .into_iter()
        .map(|e| {
            let e_dir = Sector::new(e.e_dir)
                .ok_or_else(|| GraphError::MalformedJson(format!("bad sector {}", e.e_dir)))?;
            Ok(EdgeFeature {
                src: e.src,
                dst: e.dst,
                d: e.d,
                e_dis: e.e_dis,
                e_dir,
                r: e.r,
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()?;
    Ok(DocumentGraph {
        doc_id: file.doc_id,
        nodes: file.nodes,
        directed_edges,
        mp_adjacency: file.mp_adjacency,
    })
}
