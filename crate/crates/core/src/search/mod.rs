//! Keyword, vector and hybrid retrieval over skill metadata.
//!
//! Only metadata (name, description, tags) is indexed. Every result list is
//! ordered by score descending, then `skill_id` ascending.

mod embed;
mod persist;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::ProviderError;
use crate::skill::{Category, SkillMetadata, Tag};

pub use crate::text::tokenize;
pub use embed::{
    fnv1a64, EmbedWithFallback, EmbeddingProvider, EmbeddingVector, HashEmbedder, RemoteEmbedder,
    DEFAULT_DIM,
};
pub use persist::{IndexFiles, INVERTED_FILE, INVERTED_FORMAT, VECTORS_FILE, VECTORS_FORMAT};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const DEFAULT_TOP_K: usize = 10;
pub const MAX_TOP_K: usize = 100;
const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Text indexed for a skill: name, description and tags, space separated.
pub fn metadata_text(meta: &SkillMetadata) -> String {
    let mut text = format!("{} {}", meta.name, meta.description);
    for tag in &meta.tags {
        text.push(' ');
        text.push_str(tag.as_str());
    }
    text
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("query has no searchable tokens")]
    EmptyQuery,
    #[error("query vector is zero")]
    ZeroQueryVector,
    #[error("query vector has dimension {got}, index uses {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("top_k must be between 1 and {MAX_TOP_K}")]
    InvalidTopK,
    #[error("hybrid weights must be non-negative and sum to 1")]
    InvalidWeights,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Keyword,
    Vector,
    Hybrid,
}

impl std::str::FromStr for SearchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "keyword" => Ok(SearchMode::Keyword),
            "vector" => Ok(SearchMode::Vector),
            "hybrid" => Ok(SearchMode::Hybrid),
            other => Err(format!("unknown search mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridWeights {
    pub keyword: f64,
    pub vector: f64,
}

impl Default for HybridWeights {
    fn default() -> Self {
        HybridWeights {
            keyword: 0.5,
            vector: 0.5,
        }
    }
}

impl HybridWeights {
    fn check(&self) -> Result<(), SearchError> {
        let ok = self.keyword >= 0.0
            && self.vector >= 0.0
            && ((self.keyword + self.vector) - 1.0).abs() <= WEIGHT_TOLERANCE;
        if ok {
            Ok(())
        } else {
            Err(SearchError::InvalidWeights)
        }
    }
}

/// Category must match when given; every listed tag must be present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchFilter {
    pub category: Option<Category>,
    pub tags: Vec<Tag>,
}

impl SearchFilter {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn accepts(&self, doc: &IndexedDoc) -> bool {
        self.category.is_none_or(|c| c == doc.category)
            && self.tags.iter().all(|t| doc.tags.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub skill_id: String,
    pub score: f64,
    pub mode: SearchMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedDoc {
    pub skill_id: String,
    pub name: String,
    pub description: String,
    pub category: Category,
    pub tags: Vec<Tag>,
    pub token_counts: BTreeMap<String, u32>,
    pub length: u32,
}

impl IndexedDoc {
    pub fn new(skill_id: &str, meta: &SkillMetadata) -> Self {
        let mut token_counts = BTreeMap::new();
        let tokens = tokenize(&metadata_text(meta));
        for token in &tokens {
            *token_counts.entry(token.clone()).or_insert(0u32) += 1;
        }
        IndexedDoc {
            skill_id: skill_id.to_string(),
            name: meta.name.clone(),
            description: meta.description.clone(),
            category: meta.category,
            tags: meta.tags.clone(),
            token_counts,
            length: tokens.len() as u32,
        }
    }

    pub fn text(&self) -> String {
        let mut text = format!("{} {}", self.name, self.description);
        for tag in &self.tags {
            text.push(' ');
            text.push_str(tag.as_str());
        }
        text
    }
}

fn sort_hits(hits: &mut [SearchHit]) {
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.skill_id.cmp(&b.skill_id))
    });
}

fn top(mut hits: Vec<SearchHit>, top_k: usize) -> Vec<SearchHit> {
    sort_hits(&mut hits);
    hits.truncate(top_k);
    hits
}

/// Combined inverted index and vector store.
///
/// Term statistics (document count, document frequency, average length)
/// are taken over the whole index; filters only restrict which documents
/// are scored.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    embedder_identity: String,
    dim: usize,
    docs: BTreeMap<String, IndexedDoc>,
    vectors: BTreeMap<String, EmbeddingVector>,
    postings: BTreeMap<String, BTreeSet<String>>,
    total_length: u64,
}

impl SearchIndex {
    pub fn new(embedder: &dyn EmbeddingProvider) -> Self {
        SearchIndex {
            embedder_identity: embedder.identity(),
            dim: embedder.dim(),
            docs: BTreeMap::new(),
            vectors: BTreeMap::new(),
            postings: BTreeMap::new(),
            total_length: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_identity(&self) -> &str {
        &self.embedder_identity
    }

    pub fn doc(&self, skill_id: &str) -> Option<&IndexedDoc> {
        self.docs.get(skill_id)
    }

    pub fn docs(&self) -> impl Iterator<Item = &IndexedDoc> {
        self.docs.values()
    }

    pub fn vector(&self, skill_id: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(skill_id)
    }

    /// Indexes (or re-indexes) a skill's metadata.
    pub fn insert(
        &mut self,
        skill_id: &str,
        meta: &SkillMetadata,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<(), SearchError> {
        let doc = IndexedDoc::new(skill_id, meta);
        let vector = embedder.embed(&doc.text())?;
        if vector.values.len() != self.dim {
            return Err(SearchError::DimensionMismatch {
                expected: self.dim,
                got: vector.values.len(),
            });
        }
        self.insert_parts(doc, vector);
        Ok(())
    }

    pub(crate) fn insert_parts(&mut self, doc: IndexedDoc, vector: EmbeddingVector) {
        self.remove(&doc.skill_id);
        for token in doc.token_counts.keys() {
            self.postings
                .entry(token.clone())
                .or_default()
                .insert(doc.skill_id.clone());
        }
        self.total_length += u64::from(doc.length);
        self.vectors.insert(doc.skill_id.clone(), vector);
        self.docs.insert(doc.skill_id.clone(), doc);
    }

    pub fn remove(&mut self, skill_id: &str) -> bool {
        let Some(doc) = self.docs.remove(skill_id) else {
            return false;
        };
        for token in doc.token_counts.keys() {
            if let Some(ids) = self.postings.get_mut(token) {
                ids.remove(skill_id);
                if ids.is_empty() {
                    self.postings.remove(token);
                }
            }
        }
        self.total_length -= u64::from(doc.length);
        self.vectors.remove(skill_id);
        true
    }

    /// BM25 score of one document for the given unique query terms.
    fn bm25(&self, doc: &IndexedDoc, terms: &[String]) -> f64 {
        let n = self.docs.len() as f64;
        let avgdl = self.total_length as f64 / n;
        let mut score = 0.0;
        for term in terms {
            let Some(&tf) = doc.token_counts.get(term) else {
                continue;
            };
            let df = self.postings.get(term).map_or(0, BTreeSet::len) as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let tf = f64::from(tf);
            let norm = if avgdl > 0.0 {
                1.0 - BM25_B + BM25_B * f64::from(doc.length) / avgdl
            } else {
                1.0
            };
            score += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm);
        }
        score
    }

    /// Query terms in first-occurrence order, duplicates removed.
    fn query_terms(query: &str) -> Vec<String> {
        let mut seen = BTreeSet::new();
        tokenize(query)
            .into_iter()
            .filter(|t| seen.insert(t.clone()))
            .collect()
    }

    /// All filtered documents with a positive BM25 score, unsorted.
    fn keyword_scores(&self, terms: &[String], filter: &SearchFilter) -> Vec<(String, f64)> {
        let candidates: BTreeSet<&String> = terms
            .iter()
            .filter_map(|t| self.postings.get(t))
            .flatten()
            .collect();
        candidates
            .into_iter()
            .filter_map(|id| self.docs.get(id))
            .filter(|doc| filter.accepts(doc))
            .map(|doc| (doc.skill_id.clone(), self.bm25(doc, terms)))
            .filter(|(_, score)| *score > 0.0)
            .collect()
    }

    fn vector_scores(&self, query: &EmbeddingVector, filter: &SearchFilter) -> Vec<(String, f64)> {
        self.docs
            .values()
            .filter(|doc| filter.accepts(doc))
            .map(|doc| {
                let score = self
                    .vectors
                    .get(&doc.skill_id)
                    .map_or(0.0, |v| query.cosine(v));
                (doc.skill_id.clone(), score)
            })
            .collect()
    }

    pub fn keyword_search(
        &self,
        query: &str,
        top_k: usize,
        filter: &SearchFilter,
    ) -> Result<Vec<SearchHit>, SearchError> {
        if !(1..=MAX_TOP_K).contains(&top_k) {
            return Err(SearchError::InvalidTopK);
        }
        let terms = Self::query_terms(query);
        if terms.is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        let hits = self
            .keyword_scores(&terms, filter)
            .into_iter()
            .map(|(skill_id, score)| SearchHit {
                skill_id,
                score,
                mode: SearchMode::Keyword,
            })
            .collect();
        Ok(top(hits, top_k))
    }

    pub fn vector_search(
        &self,
        query: &EmbeddingVector,
        top_k: usize,
        filter: &SearchFilter,
    ) -> Result<Vec<SearchHit>, SearchError> {
        if !(1..=MAX_TOP_K).contains(&top_k) {
            return Err(SearchError::InvalidTopK);
        }
        if query.values.len() != self.dim {
            return Err(SearchError::DimensionMismatch {
                expected: self.dim,
                got: query.values.len(),
            });
        }
        if query.is_zero() {
            return Err(SearchError::ZeroQueryVector);
        }
        let hits = self
            .vector_scores(query, filter)
            .into_iter()
            .map(|(skill_id, score)| SearchHit {
                skill_id,
                score,
                mode: SearchMode::Vector,
            })
            .collect();
        Ok(top(hits, top_k))
    }

    /// Embeds `query` and runs [`SearchIndex::vector_search`].
    pub fn vector_search_text(
        &self,
        query: &str,
        top_k: usize,
        filter: &SearchFilter,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<Vec<SearchHit>, SearchError> {
        if tokenize(query).is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        self.vector_search(&embedder.embed(query)?, top_k, filter)
    }

    /// Min-max fused keyword and vector scores.
    ///
    /// Each mode's scores are rescaled to `[0, 1]` over that mode's own
    /// candidates (keyword: positive BM25; vector: every filtered document).
    /// When a mode's candidates all score the same they map to 1 if that
    /// score is positive and 0 otherwise. Candidates are the union over
    /// modes with non-zero weight; a document missing from a mode gets 0
    /// there. Equal fused scores are ordered by the raw score of the
    /// heavier-weighted mode, then the other mode's, then by id.
    pub fn hybrid_search(
        &self,
        query: &str,
        top_k: usize,
        weights: HybridWeights,
        filter: &SearchFilter,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<Vec<SearchHit>, SearchError> {
        if !(1..=MAX_TOP_K).contains(&top_k) {
            return Err(SearchError::InvalidTopK);
        }
        weights.check()?;
        let terms = Self::query_terms(query);
        if terms.is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        let keyword_raw: BTreeMap<String, f64> = if weights.keyword > 0.0 {
            self.keyword_scores(&terms, filter).into_iter().collect()
        } else {
            BTreeMap::new()
        };
        let vector_raw: BTreeMap<String, f64> = if weights.vector > 0.0 {
            let q = embedder.embed(query)?;
            if q.is_zero() || q.values.len() != self.dim {
                BTreeMap::new()
            } else {
                self.vector_scores(&q, filter).into_iter().collect()
            }
        } else {
            BTreeMap::new()
        };
        let keyword = normalize(&keyword_raw);
        let vector = normalize(&vector_raw);
        let keyword_first = weights.keyword >= weights.vector;
        let ids: BTreeSet<&String> = keyword.keys().chain(vector.keys()).collect();
        let mut ranked: Vec<(SearchHit, f64, f64)> = ids
            .into_iter()
            .map(|id| {
                let kw = keyword.get(id).copied().unwrap_or(0.0);
                let vec = vector.get(id).copied().unwrap_or(0.0);
                let raw_kw = keyword_raw.get(id).copied().unwrap_or(0.0);
                let raw_vec = vector_raw.get(id).copied().unwrap_or(f64::NEG_INFINITY);
                let (primary, secondary) = if keyword_first { (raw_kw, raw_vec) } else { (raw_vec, raw_kw) };
                let hit = SearchHit {
                    skill_id: id.clone(),
                    score: weights.keyword * kw + weights.vector * vec,
                    mode: SearchMode::Hybrid,
                };
                (hit, primary, secondary)
            })
            .collect();
        // Rescaling can map raw scores a few ulps apart onto the same fused
        // value; such ties fall back to the raw scores before the id.
        ranked.sort_by(|a, b| {
            b.0.score
                .total_cmp(&a.0.score)
                .then_with(|| b.1.total_cmp(&a.1))
                .then_with(|| b.2.total_cmp(&a.2))
                .then_with(|| a.0.skill_id.cmp(&b.0.skill_id))
        });
        ranked.truncate(top_k);
        Ok(ranked.into_iter().map(|(hit, _, _)| hit).collect())
    }

    /// Dispatches on `mode`; hybrid uses `weights`.
    pub fn search(
        &self,
        query: &str,
        mode: SearchMode,
        top_k: usize,
        filter: &SearchFilter,
        embedder: &dyn EmbeddingProvider,
        weights: HybridWeights,
    ) -> Result<Vec<SearchHit>, SearchError> {
        match mode {
            SearchMode::Keyword => self.keyword_search(query, top_k, filter),
            SearchMode::Vector => self.vector_search_text(query, top_k, filter, embedder),
            SearchMode::Hybrid => self.hybrid_search(query, top_k, weights, filter, embedder),
        }
    }
}

fn normalize(scores: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let min = scores.values().copied().fold(f64::INFINITY, f64::min);
    let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .map(|(id, &s)| {
            let n = match (max - min).partial_cmp(&0.0) {
                Some(Ordering::Greater) => (s - min) / (max - min),
                _ if max > 0.0 => 1.0,
                _ => 0.0,
            };
            (id.clone(), n)
        })
        .collect()
}

/// Shared index with snapshot reads and exclusive writes.
#[derive(Debug, Clone)]
pub struct SharedIndex(Arc<RwLock<Arc<SearchIndex>>>);

impl SharedIndex {
    pub fn new(index: SearchIndex) -> Self {
        SharedIndex(Arc::new(RwLock::new(Arc::new(index))))
    }

    pub fn snapshot(&self) -> Arc<SearchIndex> {
        Arc::clone(&self.0.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn update<T, E>(&self, f: impl FnOnce(&mut SearchIndex) -> Result<T, E>) -> Result<T, E> {
        let mut guard = self.0.write().unwrap_or_else(|e| e.into_inner());
        let mut next = SearchIndex::clone(&guard);
        let out = f(&mut next)?;
        *guard = Arc::new(next);
        Ok(out)
    }
}
