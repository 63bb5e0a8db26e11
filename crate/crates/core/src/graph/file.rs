//! Line-oriented text form of a [`SkillGraph`].
//!
//! ```text
//! # skillnet-graph v1
//! node <id> <kind>
//! edge <src> <dst> <rel> <confidence> <provenance>
//! ```
//!
//! Nodes are sorted by id and edges by `(src, dst, rel)`, so equal graphs
//! serialize to identical bytes. Confidences use the shortest decimal form
//! that round-trips exactly.

use super::{Edge, GraphError, NodeKind, Provenance, RelationType, SkillGraph};

pub const GRAPH_HEADER: &str = "# skillnet-graph v1";

pub fn serialize_graph(graph: &SkillGraph) -> String {
    let mut out = String::with_capacity(64 * (graph.node_count() + graph.edge_count()) + 32);
    out.push_str(GRAPH_HEADER);
    out.push('\n');
    for (id, kind) in graph.nodes() {
        out.push_str(&format!("node {id} {kind}\n"));
    }
    for edge in graph.edges() {
        out.push_str(&format!(
            "edge {} {} {} {} {}\n",
            edge.src, edge.dst, edge.rel, edge.confidence, edge.provenance
        ));
    }
    out
}

pub fn load_graph(text: &str) -> Result<SkillGraph, GraphError> {
    let malformed = |line: usize, reason: String| GraphError::MalformedGraphFile { line, reason };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, header)) if header.trim_end() == GRAPH_HEADER => {}
        _ => return Err(malformed(1, format!("expected header `{GRAPH_HEADER}`"))),
    }
    let mut graph = SkillGraph::new();
    let mut edges = Vec::new();
    for (number, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            [first, ..] if first.starts_with('#') => {}
            ["node", id, kind] => {
                let kind: NodeKind = kind.parse().map_err(|e| malformed(number, e))?;
                graph
                    .add_node(*id, kind)
                    .map_err(|e| malformed(number, e.to_string()))?;
            }
            ["edge", src, dst, rel, confidence, provenance] => {
                let rel: RelationType = rel.parse().map_err(|e| malformed(number, e))?;
                let confidence: f64 = confidence
                    .parse()
                    .map_err(|_| malformed(number, format!("bad confidence `{confidence}`")))?;
                let provenance: Provenance =
                    provenance.parse().map_err(|e| malformed(number, e))?;
                edges.push((number, Edge::new(*src, *dst, rel, confidence, provenance)));
            }
            _ => return Err(malformed(number, format!("unrecognized line `{line}`"))),
        }
    }
    for (number, edge) in edges {
        graph
            .add_edge(edge)
            .map_err(|e| malformed(number, e.to_string()))?;
    }
    Ok(graph)
}
