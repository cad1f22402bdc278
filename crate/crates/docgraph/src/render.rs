//! Deterministic SVG rendering of a document and its direction-of-sight
//! graph: segment boxes to scale, one arrow per directed edge colored by
//! sector, and a fixed legend.

use crate::doc_model::Document;
use crate::geometry::Sector;
use crate::graph_builder::DocumentGraph;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("graph and document do not correspond: {0}")]
    GraphDocMismatch(String),
}

/// Fixed sector palette, index 0 (East) through 7 (South-East).
pub const SECTOR_COLORS: [&str; 8] = [
    "#e6194b", "#f58231", "#ffe119", "#3cb44b", "#42d4f4", "#4363d8", "#911eb4", "#f032e6",
];

#[derive(Debug, Clone)]
pub struct RenderOptions {
    /// Write d and e_dis next to each arrow midpoint.
    pub edge_labels: bool,
    /// Write each segment's text inside its box.
    pub node_text: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            edge_labels: false,
            node_text: true,
        }
    }
}

/// Render `graph` over `doc` as a standalone SVG. Output bytes depend only
/// on the inputs and options.
pub fn render_svg(
    doc: &Document,
    graph: &DocumentGraph,
    opts: &RenderOptions,
) -> Result<String, RenderError> {
    if doc.doc_id != graph.doc_id {
        return Err(RenderError::GraphDocMismatch(format!(
            "doc_id {} vs {}",
            doc.doc_id, graph.doc_id
        )));
    }
    if doc.segments.len() != graph.node_count() {
        return Err(RenderError::GraphDocMismatch(format!(
            "{} segments vs {} nodes",
            doc.segments.len(),
            graph.node_count()
        )));
    }
    for (seg, node) in doc.segments.iter().zip(&graph.nodes) {
        let b = node.bbox();
        if seg.bbox != b {
            return Err(RenderError::GraphDocMismatch(format!(
                "segment {} box differs from graph node",
                seg.id
            )));
        }
    }
    for e in &graph.directed_edges {
        if e.src >= graph.node_count() || e.dst >= graph.node_count() {
            return Err(RenderError::GraphDocMismatch(format!(
                "edge {} -> {} out of range",
                e.src, e.dst
            )));
        }
    }

    // Canvas: the normalized 0..1000 grid plus a right-hand legend strip.
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1180 1000\" \
         font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"#ffffff\" stroke=\"#cccccc\"/>");

    for seg in &doc.segments {
        let b = &seg.bbox;
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#f0f0f0\" stroke=\"#333333\"/>",
            b.x1,
            b.y1,
            b.x2 - b.x1,
            b.y2 - b.y1
        );
        if opts.node_text {
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" fill=\"#333333\">{}</text>",
                b.x1 + 2,
                b.y1 + 14,
                escape(&seg.text)
            );
        }
    }

    for e in &graph.directed_edges {
        let (sx, sy) = graph.nodes[e.src].bbox().center();
        let (tx, ty) = graph.nodes[e.dst].bbox().center();
        let color = SECTOR_COLORS[e.e_dir.index()];
        let _ = writeln!(
            svg,
            "<line x1=\"{sx:.1}\" y1=\"{sy:.1}\" x2=\"{tx:.1}\" y2=\"{ty:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\" marker-end=\"url(#arrow-{})\"/>",
            e.e_dir.index()
        );
        if opts.edge_labels {
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">d={:.1} e={:.3}</text>",
                (sx + tx) / 2.0,
                (sy + ty) / 2.0,
                e.d,
                e.e_dis
            );
        }
    }

    // Arrowhead markers, one per sector color.
    let _ = writeln!(svg, "<defs>");
    for s in Sector::all() {
        let _ = writeln!(
            svg,
            "<marker id=\"arrow-{}\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" \
             markerWidth=\"6\" markerHeight=\"6\" orient=\"auto-start-reverse\">\
             <path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"{}\"/></marker>",
            s.index(),
            SECTOR_COLORS[s.index()]
        );
    }
    let _ = writeln!(svg, "</defs>");

    // Legend, always present.
    let _ = writeln!(
        svg,
        "<text x=\"1020\" y=\"30\" fill=\"#000000\">sectors</text>"
    );
    for s in Sector::all() {
        let y = 50 + 24 * s.index() as i64;
        let _ = writeln!(
            svg,
            "<rect x=\"1020\" y=\"{}\" width=\"16\" height=\"16\" fill=\"{}\"/>",
            y,
            SECTOR_COLORS[s.index()]
        );
        let _ = writeln!(
            svg,
            "<text x=\"1042\" y=\"{}\" fill=\"#000000\">{} {}</text>",
            y + 13,
            s.index(),
            s.name()
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
