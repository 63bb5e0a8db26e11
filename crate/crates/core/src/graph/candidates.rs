//! Candidate relation proposal and judge confirmation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Edge, Provenance, RelationType, DEPENDENCY_CONFIDENCE};
use crate::judge::{JudgeProvider, RelationVerdict};
use crate::provider::ProviderError;
use crate::search::{metadata_text, EmbeddingProvider};
use crate::skill::SkillPackage;

/// Cosines within this distance of the threshold count as meeting it.
const THRESHOLD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub skill_id: String,
    pub outcome: TraceOutcome,
}

/// One recorded run: the skills invoked, in order.
pub type Trace = Vec<TraceStep>;

/// Proposes candidate edges among `skills`.
///
/// * `SimilarTo` for every pair whose metadata embeddings have cosine at or
///   above `threshold`; confidence is the cosine, clamped to `[0, 1]`.
/// * `DependOn(b, a)` when `b`'s instructions mention `a`'s name or `a`'s
///   entry resource path (unless `b` bundles a file at that same path).
/// * `ComposeWith(a, b)` when a successful `a` is immediately followed by
///   `b` in a trace; confidence is the fraction of `a`'s successful,
///   non-final occurrences that hand over to `b`.
///
/// Output is sorted by `(src, dst, rel)`.
pub fn propose_candidates(
    skills: &[SkillPackage],
    embedder: &dyn EmbeddingProvider,
    threshold: f64,
    traces: &[Trace],
) -> Result<Vec<Edge>, ProviderError> {
    let all: Vec<&SkillPackage> = skills.iter().collect();
    let mut edges = propose_between(&all, &all, embedder, threshold)?;
    edges.extend(trace_candidates(skills, traces));
    Ok(finish(edges))
}

/// Candidates that involve at least one skill from `new`, against each other
/// and against `existing`. Used when skills join an already-built graph.
pub fn propose_for_new(
    new: &[&SkillPackage],
    existing: &[&SkillPackage],
    embedder: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<Vec<Edge>, ProviderError> {
    let mut edges = propose_between(new, new, embedder, threshold)?;
    edges.extend(propose_between(new, existing, embedder, threshold)?);
    Ok(finish(edges))
}

fn finish(mut edges: Vec<Edge>) -> Vec<Edge> {
    edges = edges.into_iter().map(Edge::canonical).collect();
    edges.sort_by(|a, b| {
        (&a.src, &a.dst, a.rel)
            .cmp(&(&b.src, &b.dst, b.rel))
            .then(b.confidence.total_cmp(&a.confidence))
    });
    edges.dedup_by(|later, earlier| {
        later.src == earlier.src && later.dst == earlier.dst && later.rel == earlier.rel
    });
    edges
}

fn propose_between(
    left: &[&SkillPackage],
    right: &[&SkillPackage],
    embedder: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<Vec<Edge>, ProviderError> {
    let embed = |pkg: &SkillPackage| embedder.embed(&metadata_text(&pkg.document.metadata));
    let left_vecs = left.iter().map(|p| embed(p)).collect::<Result<Vec<_>, _>>()?;
    let right_vecs = right.iter().map(|p| embed(p)).collect::<Result<Vec<_>, _>>()?;
    let mut edges = Vec::new();
    for (a, va) in left.iter().zip(&left_vecs) {
        for (b, vb) in right.iter().zip(&right_vecs) {
            if a.id == b.id {
                continue;
            }
            if a.id < b.id {
                let cosine = va.cosine(vb);
                if cosine >= threshold - THRESHOLD_TOLERANCE {
                    edges.push(Edge::new(
                        &a.id,
                        &b.id,
                        RelationType::SimilarTo,
                        cosine.clamp(0.0, 1.0),
                        Provenance::EmbeddingSimilarity,
                    ));
                }
            }
            for (dependent, prerequisite) in [(a, b), (b, a)] {
                if references(dependent, prerequisite) {
                    edges.push(Edge::new(
                        &dependent.id,
                        &prerequisite.id,
                        RelationType::DependOn,
                        DEPENDENCY_CONFIDENCE,
                        Provenance::DependencyExtraction,
                    ));
                }
            }
        }
    }
    Ok(edges)
}

/// Whole-word, case-insensitive occurrence of `needle` in `haystack`, where
/// word characters are ASCII alphanumerics, `-` and `_`.
fn mentions(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let haystack = haystack.to_lowercase();
    let needle = needle.to_lowercase();
    let is_word = |c: char| c.is_ascii_alphanumeric() || c == '-' || c == '_';
    haystack.match_indices(&needle).any(|(start, m)| {
        let before = haystack[..start].chars().next_back();
        let after = haystack[start + m.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

fn references(dependent: &SkillPackage, prerequisite: &SkillPackage) -> bool {
    let text = &dependent.document.instructions;
    if mentions(text, prerequisite.name()) {
        return true;
    }
    match prerequisite.document.entry() {
        Some(entry) if dependent.resource(entry).is_none() => text.contains(entry),
        _ => false,
    }
}

fn trace_candidates(skills: &[SkillPackage], traces: &[Trace]) -> Vec<Edge> {
    let known: std::collections::BTreeSet<&str> = skills.iter().map(|s| s.id.as_str()).collect();
    let mut handovers: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut completions: BTreeMap<&str, usize> = BTreeMap::new();
    for trace in traces {
        for pair in trace.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.outcome != TraceOutcome::Success {
                continue;
            }
            *completions.entry(a.skill_id.as_str()).or_default() += 1;
            if a.skill_id != b.skill_id {
                *handovers.entry((a.skill_id.as_str(), b.skill_id.as_str())).or_default() += 1;
            }
        }
    }
    handovers
        .into_iter()
        .filter(|((a, b), _)| known.contains(a) && known.contains(b))
        .map(|((a, b), count)| {
            Edge::new(
                a,
                b,
                RelationType::ComposeWith,
                count as f64 / completions[a] as f64,
                Provenance::TraceAlignment,
            )
        })
        .collect()
}

/// Asks `judge` about each candidate. Accepted candidates pass through,
/// retyped ones come back with the new relation and `JudgeInference`
/// provenance, rejected ones are dropped.
pub fn confirm_relations(
    candidates: Vec<Edge>,
    judge: &dyn JudgeProvider,
) -> Result<Vec<Edge>, ProviderError> {
    let mut confirmed = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        match judge.confirm_relation(&candidate)? {
            RelationVerdict::Accept => confirmed.push(candidate),
            RelationVerdict::Reject => {}
            RelationVerdict::Retype(rel) => confirmed.push(
                Edge {
                    rel,
                    provenance: Provenance::JudgeInference,
                    ..candidate
                }
                .canonical(),
            ),
        }
    }
    Ok(confirmed)
}
