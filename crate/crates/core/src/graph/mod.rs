//! Directed, typed multi-relational graph over skills and taxonomy nodes.
//!
//! Skills, packages, categories and tags share one node space. `SimilarTo`
//! is symmetric and stored once with `src < dst`; every other relation is
//! directed. `DependOn(a, b)` reads "a depends on b".

mod candidates;
mod file;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skill::{Category, Tag};

pub use candidates::{
    confirm_relations, propose_candidates, propose_for_new, Trace, TraceOutcome, TraceStep,
};
pub use file::{load_graph, serialize_graph, GRAPH_HEADER};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.85;
pub const DEPENDENCY_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Skill,
    Package,
    Category,
    Tag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationType {
    SimilarTo,
    BelongTo,
    ComposeWith,
    DependOn,
    PackagedIn,
    InCategory,
    TaggedWith,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    EmbeddingSimilarity,
    DependencyExtraction,
    TraceAlignment,
    JudgeInference,
    Manual,
}

macro_rules! snake_names {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$(<$ty>::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $(<$ty>::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok(<$ty>::$variant),)+
                    other => Err(format!("unknown {} `{other}`", stringify!($ty))),
                }
            }
        }
    };
}

snake_names!(NodeKind {
    Skill => "skill",
    Package => "package",
    Category => "category",
    Tag => "tag",
});

snake_names!(RelationType {
    SimilarTo => "similar_to",
    BelongTo => "belong_to",
    ComposeWith => "compose_with",
    DependOn => "depend_on",
    PackagedIn => "packaged_in",
    InCategory => "in_category",
    TaggedWith => "tagged_with",
});

snake_names!(Provenance {
    EmbeddingSimilarity => "embedding_similarity",
    DependencyExtraction => "dependency_extraction",
    TraceAlignment => "trace_alignment",
    JudgeInference => "judge_inference",
    Manual => "manual",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub rel: RelationType,
    pub confidence: f64,
    pub provenance: Provenance,
}

impl Edge {
    pub fn new(
        src: impl Into<String>,
        dst: impl Into<String>,
        rel: RelationType,
        confidence: f64,
        provenance: Provenance,
    ) -> Self {
        Edge {
            src: src.into(),
            dst: dst.into(),
            rel,
            confidence,
            provenance,
        }
    }

    /// `SimilarTo` edges with endpoints ordered `src < dst`; others unchanged.
    pub fn canonical(mut self) -> Self {
        if self.rel == RelationType::SimilarTo && self.src > self.dst {
            std::mem::swap(&mut self.src, &mut self.dst);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("invalid node id `{0}`")]
    InvalidNodeId(String),
    #[error("node `{0}` already exists with another kind")]
    NodeKindConflict(String),
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("dependency cycle: {}", .0.join(" -> "))]
    DependencyCycle(Vec<String>),
    #[error("malformed graph file at line {line}: {reason}")]
    MalformedGraphFile { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct EdgeAttrs {
    confidence: f64,
    provenance: Provenance,
}

type EdgeKey = (String, String, RelationType);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkillGraph {
    nodes: BTreeMap<String, NodeKind>,
    edges: BTreeMap<EdgeKey, EdgeAttrs>,
}

pub fn category_node(category: Category) -> String {
    format!("category:{}", category.as_str())
}

pub fn tag_node(tag: &Tag) -> String {
    format!("tag:{tag}")
}

pub fn package_node(name: &str) -> String {
    format!("package:{name}")
}

fn valid_node_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(|c| c.is_whitespace() || c.is_control())
}

impl SkillGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        self.nodes.get(id).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, NodeKind)> {
        self.nodes.iter().map(|(id, kind)| (id.as_str(), *kind))
    }

    /// Edges in canonical `(src, dst, rel)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|((src, dst, rel), attrs)| Edge {
            src: src.clone(),
            dst: dst.clone(),
            rel: *rel,
            confidence: attrs.confidence,
            provenance: attrs.provenance,
        })
    }

    pub fn edge(&self, src: &str, dst: &str, rel: RelationType) -> Option<Edge> {
        let probe = Edge::new(src, dst, rel, 0.0, Provenance::Manual).canonical();
        let key = (probe.src, probe.dst, rel);
        self.edges.get(&key).map(|attrs| Edge {
            src: key.0.clone(),
            dst: key.1.clone(),
            rel,
            confidence: attrs.confidence,
            provenance: attrs.provenance,
        })
    }

    /// Adds a node; re-adding with the same kind is a no-op.
    pub fn add_node(&mut self, id: impl Into<String>, kind: NodeKind) -> Result<(), GraphError> {
        let id = id.into();
        if !valid_node_id(&id) {
            return Err(GraphError::InvalidNodeId(id));
        }
        match self.nodes.get(&id) {
            Some(existing) if *existing != kind => Err(GraphError::NodeKindConflict(id)),
            Some(_) => Ok(()),
            None => {
                self.nodes.insert(id, kind);
                Ok(())
            }
        }
    }

    /// Inserts `edge`. A repeated `(src, dst, rel)` keeps the larger
    /// confidence (and that edge's provenance).
    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        let edge = edge.canonical();
        for endpoint in [&edge.src, &edge.dst] {
            if !self.nodes.contains_key(endpoint) {
                return Err(GraphError::UnknownNode(endpoint.clone()));
            }
        }
        if edge.src == edge.dst {
            return Err(GraphError::SelfLoop(edge.src));
        }
        if !(0.0..=1.0).contains(&edge.confidence) {
            return Err(GraphError::InvalidConfidence(edge.confidence));
        }
        let attrs = EdgeAttrs {
            confidence: edge.confidence,
            provenance: edge.provenance,
        };
        self.edges
            .entry((edge.src, edge.dst, edge.rel))
            .and_modify(|old| {
                if attrs.confidence > old.confidence {
                    *old = attrs;
                }
            })
            .or_insert(attrs);
        Ok(())
    }

    /// Removes a node together with every incident edge.
    pub fn remove_node(&mut self, id: &str) -> bool {
        if self.nodes.remove(id).is_none() {
            return false;
        }
        self.edges.retain(|(src, dst, _), _| src != id && dst != id);
        true
    }

    /// Adds a skill node plus its category and tag taxonomy links.
    pub fn add_skill(
        &mut self,
        skill_id: &str,
        category: Category,
        tags: &[Tag],
    ) -> Result<(), GraphError> {
        self.add_node(skill_id, NodeKind::Skill)?;
        let category_id = category_node(category);
        self.add_node(category_id.clone(), NodeKind::Category)?;
        self.add_edge(Edge::new(skill_id, category_id, RelationType::InCategory, 1.0, Provenance::Manual))?;
        for tag in tags {
            let tag_id = tag_node(tag);
            self.add_node(tag_id.clone(), NodeKind::Tag)?;
            self.add_edge(Edge::new(skill_id, tag_id, RelationType::TaggedWith, 1.0, Provenance::Manual))?;
        }
        Ok(())
    }

    /// Records that `skill_id` ships in the named package collection.
    pub fn add_to_package(&mut self, skill_id: &str, package: &str) -> Result<(), GraphError> {
        let package_id = package_node(package);
        self.add_node(package_id.clone(), NodeKind::Package)?;
        self.add_edge(Edge::new(skill_id, package_id, RelationType::PackagedIn, 1.0, Provenance::Manual))
    }

    /// Every edge with `id` as either endpoint.
    pub fn incident_edges(&self, id: &str) -> Vec<Edge> {
        self.edges().filter(|e| e.src == id || e.dst == id).collect()
    }

    /// Outgoing targets of `id` over `rel`, in id order. For `SimilarTo`
    /// both directions count.
    pub fn neighbors(&self, id: &str, rel: RelationType) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .edges
            .keys()
            .filter(|(_, _, r)| *r == rel)
            .filter_map(|(src, dst, _)| {
                if src == id {
                    Some(dst.as_str())
                } else if rel == RelationType::SimilarTo && dst == id {
                    Some(src.as_str())
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn adjacency(&self, rel: RelationType) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (src, dst, r) in self.edges.keys() {
            if *r == rel {
                adj.entry(src.as_str()).or_default().push(dst.as_str());
            }
        }
        // Keys iterate sorted by (src, dst), so each list is already sorted.
        adj
    }

    /// `skill_id` preceded by all of its transitive `DependOn`
    /// prerequisites, every prerequisite before its dependents. Ties go to
    /// the lexicographically smaller id.
    pub fn execution_plan(&self, skill_id: &str) -> Result<Vec<String>, GraphError> {
        if !self.contains(skill_id) {
            return Err(GraphError::UnknownNode(skill_id.to_string()));
        }
        let deps = self.adjacency(RelationType::DependOn);

        // Reachable prerequisite set, with cycle detection by DFS colouring.
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
        let mut path: Vec<&str> = Vec::new();
        let mut stack: Vec<(&str, usize)> = vec![(skill_id, 0)];
        marks.insert(skill_id, Mark::Active);
        path.push(skill_id);
        while let Some((node, next)) = stack.last_mut() {
            let children = deps.get(*node).map(Vec::as_slice).unwrap_or(&[]);
            if let Some(&child) = children.get(*next) {
                *next += 1;
                match marks.get(child) {
                    Some(Mark::Active) => {
                        let start = path.iter().position(|n| *n == child).unwrap_or(0);
                        let mut cycle: Vec<String> =
                            path[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(child.to_string());
                        return Err(GraphError::DependencyCycle(cycle));
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(child, Mark::Active);
                        path.push(child);
                        stack.push((child, 0));
                    }
                }
            } else {
                marks.insert(*node, Mark::Done);
                path.pop();
                stack.pop();
            }
        }

        // Kahn's algorithm over the reachable set; a node is ready once all
        // of its prerequisites are placed.
        let reachable: BTreeSet<&str> = marks.keys().copied().collect();
        let mut pending: BTreeMap<&str, usize> = BTreeMap::new();
        let mut dependents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for &node in &reachable {
            let prereqs = deps.get(node).map(Vec::as_slice).unwrap_or(&[]);
            pending.insert(node, prereqs.len());
            for &p in prereqs {
                dependents.entry(p).or_default().push(node);
            }
        }
        let mut ready: BTreeSet<&str> = pending
            .iter()
            .filter(|(_, n)| **n == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut plan = Vec::with_capacity(reachable.len());
        while let Some(node) = ready.pop_first() {
            plan.push(node.to_string());
            for &dependent in dependents.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                let count = pending.get_mut(dependent).expect("dependent is reachable");
                *count -= 1;
                if *count == 0 {
                    ready.insert(dependent);
                }
            }
        }
        debug_assert_eq!(plan.len(), reachable.len());
        debug_assert_eq!(plan.last().map(String::as_str), Some(skill_id));
        Ok(plan)
    }

    /// Shortest `ComposeWith` path from `source` to `target`; among equally
    /// short paths the lexicographically smallest sequence wins.
    pub fn compose_pipeline(
        &self,
        source: &str,
        target: &str,
    ) -> Result<Option<Vec<String>>, GraphError> {
        for id in [source, target] {
            if !self.contains(id) {
                return Err(GraphError::UnknownNode(id.to_string()));
            }
        }
        if source == target {
            return Ok(Some(vec![source.to_string()]));
        }
        let adj = self.adjacency(RelationType::ComposeWith);
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = VecDeque::from([source]);
        let mut seen = BTreeSet::from([source]);
        while let Some(node) = queue.pop_front() {
            for &next in adj.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                if !seen.insert(next) {
                    continue;
                }
                parent.insert(next, node);
                if next == target {
                    let mut path = vec![target.to_string()];
                    let mut cursor = target;
                    while let Some(&p) = parent.get(cursor) {
                        path.push(p.to_string());
                        cursor = p;
                    }
                    path.reverse();
                    return Ok(Some(path));
                }
                queue.push_back(next);
            }
        }
        Ok(None)
    }

    /// Connected components of the `SimilarTo` relation with at least two
    /// members; members sorted, clusters ordered by smallest member.
    pub fn redundancy_clusters(&self) -> Vec<Vec<String>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (src, dst, rel) in self.edges.keys() {
            if *rel == RelationType::SimilarTo {
                adj.entry(src).or_default().push(dst);
                adj.entry(dst).or_default().push(src);
            }
        }
        let mut seen = BTreeSet::new();
        let mut clusters = Vec::new();
        for &start in adj.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut component = vec![start];
            let mut frontier = vec![start];
            while let Some(node) = frontier.pop() {
                for &next in &adj[node] {
                    if seen.insert(next) {
                        component.push(next);
                        frontier.push(next);
                    }
                }
            }
            component.sort_unstable();
            clusters.push(component.into_iter().map(str::to_string).collect::<Vec<_>>());
        }
        clusters.sort();
        clusters
    }
}

/// Shared graph with snapshot reads and exclusive writes.
#[derive(Debug, Clone, Default)]
pub struct SharedGraph(Arc<RwLock<Arc<SkillGraph>>>);

impl SharedGraph {
    pub fn new(graph: SkillGraph) -> Self {
        SharedGraph(Arc::new(RwLock::new(Arc::new(graph))))
    }

    pub fn snapshot(&self) -> Arc<SkillGraph> {
        Arc::clone(&self.0.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Applies `f` to a copy and publishes it only when `f` succeeds.
    pub fn update<T, E>(&self, f: impl FnOnce(&mut SkillGraph) -> Result<T, E>) -> Result<T, E> {
        let mut guard = self.0.write().unwrap_or_else(|e| e.into_inner());
        let mut next = SkillGraph::clone(&guard);
        let out = f(&mut next)?;
        *guard = Arc::new(next);
        Ok(out)
    }
}
