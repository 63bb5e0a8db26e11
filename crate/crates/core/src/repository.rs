//! A skill repository: the store together with its search index, relation
//! graph and the providers that curate new contributions.
//!
//! The store is the source of truth. The index is built from manifest
//! metadata only and the graph from skill nodes plus confirmed relation
//! candidates; both are persisted next to the store and rebuilt when they
//! disagree with the manifest.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::{consolidate, AdmittedSkill, CurationConfig, CurationReport};
use crate::evaluation::sandbox::Sandbox;
use crate::evaluation::{EvaluationError, Grades};
use crate::graph::{
    confirm_relations, propose_candidates, propose_for_new, Edge, GraphError, RelationType, SharedGraph,
    SkillGraph, Trace, DEFAULT_SIMILARITY_THRESHOLD,
};
use crate::judge::JudgeProvider;
use crate::provider::ProviderError;
use crate::search::{
    EmbeddingProvider, HybridWeights, IndexFiles, SearchError, SearchFilter, SearchIndex, SearchMode, SharedIndex,
};
use crate::skill::{Category, SkillPackage, Tag};
use crate::store::{ManifestEntry, SkillStore, StoreError, StoreStats};

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("index persistence failed: {0}")]
    Index(#[source] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct RepositoryConfig {
    pub curation: CurationConfig,
    pub similarity_threshold: f64,
    pub hybrid_weights: HybridWeights,
}

impl Default for RepositoryConfig {
    fn default() -> Self {
        RepositoryConfig {
            curation: CurationConfig::default(),
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            hybrid_weights: HybridWeights::default(),
        }
    }
}

/// One ranked search result with its display metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub skill_id: String,
    pub name: String,
    pub description: String,
    pub category: Category,
    pub tags: Vec<Tag>,
    pub score: f64,
}

/// Outcome of contributing a single package.
#[derive(Debug, Clone, PartialEq)]
pub enum Contribution {
    Admitted { skill_id: String, grades: Grades },
    Duplicate { existing_id: String },
    /// Filtered out or rejected at admission; the report says which.
    Rejected { report: CurationReport },
}

/// Outcome of ingesting a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ingestion {
    pub report: CurationReport,
    /// `(package id, stored id)` for every newly stored skill.
    pub stored: Vec<(String, String)>,
    /// `(package id, existing id)` for admitted packages already in the store.
    pub already_stored: Vec<(String, String)>,
    pub relations_added: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub candidates: usize,
    pub confirmed: usize,
    pub edges_by_relation: BTreeMap<RelationType, usize>,
    pub redundancy_clusters: Vec<Vec<String>>,
}

pub struct Repository {
    store: SkillStore,
    index: SharedIndex,
    graph: SharedGraph,
    embedder: Arc<dyn EmbeddingProvider>,
    judge: Arc<dyn JudgeProvider>,
    sandbox: Option<Sandbox>,
    config: RepositoryConfig,
}

impl Repository {
    /// Opens the store at `root`, loading the persisted index and graph or
    /// rebuilding them when missing or stale.
    pub fn open(
        root: impl Into<PathBuf>,
        embedder: Arc<dyn EmbeddingProvider>,
        judge: Arc<dyn JudgeProvider>,
        sandbox: Option<Sandbox>,
        config: RepositoryConfig,
    ) -> Result<Self, RepositoryError> {
        let store = SkillStore::open(root)?;
        let manifest = store.manifest();

        let files = IndexFiles::new(store.index_dir());
        let index = match files.load(embedder.as_ref()) {
            Ok(index)
                if index.len() == manifest.skills.len()
                    && manifest.skills.keys().all(|id| index.doc(id).is_some()) =>
            {
                index
            }
            loaded => {
                if let Err(e) = loaded {
                    tracing::info!(reason = %e, "rebuilding search index");
                }
                let index = build_index(manifest.skills.values(), embedder.as_ref())?;
                files.save(&index).map_err(RepositoryError::Index)?;
                index
            }
        };

        let mut graph = store.load_graph()?;
        let known: Vec<String> = graph
            .nodes()
            .filter(|(_, kind)| *kind == crate::graph::NodeKind::Skill)
            .map(|(id, _)| id.to_string())
            .collect();
        let mut changed = false;
        for id in known {
            if !manifest.skills.contains_key(&id) {
                graph.remove_node(&id);
                changed = true;
            }
        }
        for entry in manifest.skills.values() {
            if !graph.contains(&entry.skill_id) {
                graph.add_skill(&entry.skill_id, entry.category, &entry.tags)?;
                changed = true;
            }
        }
        if changed {
            let guard = store.lock_writes();
            store.save_graph(&guard, &graph)?;
        }

        Ok(Repository {
            store,
            index: SharedIndex::new(index),
            graph: SharedGraph::new(graph),
            embedder,
            judge,
            sandbox,
            config,
        })
    }

    pub fn store(&self) -> &SkillStore {
        &self.store
    }

    pub fn index(&self) -> Arc<SearchIndex> {
        self.index.snapshot()
    }

    pub fn graph(&self) -> Arc<SkillGraph> {
        self.graph.snapshot()
    }

    pub fn embedder(&self) -> &dyn EmbeddingProvider {
        self.embedder.as_ref()
    }

    pub fn judge(&self) -> &dyn JudgeProvider {
        self.judge.as_ref()
    }

    pub fn sandbox(&self) -> Option<&Sandbox> {
        self.sandbox.as_ref()
    }

    pub fn config(&self) -> &RepositoryConfig {
        &self.config
    }

    /// Ranked search over the index snapshot. Reads no package documents.
    pub fn search(
        &self,
        query: &str,
        mode: SearchMode,
        top_k: usize,
        filter: &SearchFilter,
    ) -> Result<Vec<SearchResult>, RepositoryError> {
        let index = self.index.snapshot();
        let hits = index.search(query, mode, top_k, filter, self.embedder.as_ref(), self.config.hybrid_weights)?;
        Ok(hits
            .into_iter()
            .filter_map(|hit| {
                let doc = index.doc(&hit.skill_id)?;
                Some(SearchResult {
                    skill_id: hit.skill_id,
                    name: doc.name.clone(),
                    description: doc.description.clone(),
                    category: doc.category,
                    tags: doc.tags.clone(),
                    score: hit.score,
                })
            })
            .collect())
    }

    pub fn metadata(&self, skill_id: &str) -> Result<ManifestEntry, RepositoryError> {
        Ok(self.store.metadata(skill_id)?)
    }

    pub fn archive(&self, skill_id: &str) -> Result<Vec<u8>, RepositoryError> {
        Ok(self.store.archive(skill_id)?)
    }

    pub fn stats(&self) -> StoreStats {
        self.store.stats()
    }

    /// Typed edges incident to a stored skill.
    pub fn relations(&self, skill_id: &str) -> Result<Vec<Edge>, RepositoryError> {
        if !self.store.contains(skill_id) {
            return Err(StoreError::UnknownSkill(skill_id.to_string()).into());
        }
        Ok(self.graph.snapshot().incident_edges(skill_id))
    }

    /// Runs one package through curation and stores it on admission.
    pub fn contribute(&self, pkg: SkillPackage) -> Result<Contribution, RepositoryError> {
        if let Err(StoreError::Duplicate { existing_id }) = self.store.placement(&pkg) {
            return Ok(Contribution::Duplicate { existing_id });
        }
        let consolidation = consolidate(vec![pkg], self.judge.as_ref(), self.sandbox.as_ref(), &self.config.curation)?;
        let Some(admitted) = consolidation.admitted.into_iter().next() else {
            return Ok(Contribution::Rejected {
                report: consolidation.report,
            });
        };
        let grades = admitted.evaluation.grades.clone();
        let (stored, duplicates, _) = self.store_admitted(vec![admitted])?;
        match (stored.into_iter().next(), duplicates.into_iter().next()) {
            (Some((_, skill_id)), _) => Ok(Contribution::Admitted { skill_id, grades }),
            (None, Some((_, existing_id))) => Ok(Contribution::Duplicate { existing_id }),
            (None, None) => unreachable!("an admitted package is either stored or a duplicate"),
        }
    }

    /// Curates a batch and stores every admitted package.
    pub fn ingest(&self, packages: Vec<SkillPackage>) -> Result<Ingestion, RepositoryError> {
        let consolidation = consolidate(packages, self.judge.as_ref(), self.sandbox.as_ref(), &self.config.curation)?;
        let (stored, already_stored, relations_added) = self.store_admitted(consolidation.admitted)?;
        Ok(Ingestion {
            report: consolidation.report,
            stored,
            already_stored,
            relations_added,
        })
    }

    #[allow(clippy::type_complexity)]
    fn store_admitted(
        &self,
        admitted: Vec<AdmittedSkill>,
    ) -> Result<(Vec<(String, String)>, Vec<(String, String)>, usize), RepositoryError> {
        let guard = self.store.lock_writes();
        let mut stored = Vec::new();
        let mut duplicates = Vec::new();
        let mut new_packages = Vec::new();
        let mut new_entries = Vec::new();
        for skill in admitted {
            let original = skill.package.id.clone();
            let id = match self.store.placement(&skill.package) {
                Ok(id) => id,
                Err(StoreError::Duplicate { existing_id }) => {
                    duplicates.push((original, existing_id));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let entry = self
                .store
                .insert(&guard, &id, &skill.package, skill.category, &skill.tags, &skill.evaluation)?;
            let mut pkg = skill.package;
            pkg.id = id.clone();
            new_packages.push(pkg);
            new_entries.push(entry);
            stored.push((original, id));
        }
        if new_entries.is_empty() {
            return Ok((stored, duplicates, 0));
        }

        self.index.update(|index| {
            for entry in &new_entries {
                index.insert(&entry.skill_id, &entry.metadata(), self.embedder.as_ref())?;
            }
            Ok::<_, SearchError>(())
        })?;
        IndexFiles::new(self.store.index_dir())
            .save(&self.index.snapshot())
            .map_err(RepositoryError::Index)?;

        let new_ids: Vec<&str> = new_entries.iter().map(|e| e.skill_id.as_str()).collect();
        let existing: Vec<SkillPackage> = self
            .store
            .manifest()
            .skills
            .keys()
            .filter(|id| !new_ids.contains(&id.as_str()))
            .map(|id| self.store.load_package(id))
            .collect::<Result<_, _>>()?;
        let new_refs: Vec<&SkillPackage> = new_packages.iter().collect();
        let existing_refs: Vec<&SkillPackage> = existing.iter().collect();
        let candidates = propose_for_new(
            &new_refs,
            &existing_refs,
            self.embedder.as_ref(),
            self.config.similarity_threshold,
        )?;
        let confirmed = confirm_relations(candidates, self.judge.as_ref())?;
        let relations_added = confirmed.len();
        self.graph.update(|graph| {
            for entry in &new_entries {
                graph.add_skill(&entry.skill_id, entry.category, &entry.tags)?;
            }
            for edge in confirmed {
                graph.add_edge(edge)?;
            }
            Ok::<_, GraphError>(())
        })?;
        self.store.save_graph(&guard, &self.graph.snapshot())?;
        Ok((stored, duplicates, relations_added))
    }

    /// Recomputes relation candidates over every stored skill (plus the
    /// given traces), confirms them with the judge and merges them into the
    /// graph.
    pub fn analyze(&self, traces: &[Trace]) -> Result<AnalysisSummary, RepositoryError> {
        let guard = self.store.lock_writes();
        let manifest = self.store.manifest();
        let packages: Vec<SkillPackage> = manifest
            .skills
            .keys()
            .map(|id| self.store.load_package(id))
            .collect::<Result<_, _>>()?;
        let candidates = propose_candidates(&packages, self.embedder.as_ref(), self.config.similarity_threshold, traces)?;
        let candidate_count = candidates.len();
        let confirmed = confirm_relations(candidates, self.judge.as_ref())?;
        let confirmed_count = confirmed.len();
        self.graph.update(|graph| {
            for entry in manifest.skills.values() {
                graph.add_skill(&entry.skill_id, entry.category, &entry.tags)?;
            }
            for edge in confirmed {
                graph.add_edge(edge)?;
            }
            Ok::<_, GraphError>(())
        })?;
        let graph = self.graph.snapshot();
        self.store.save_graph(&guard, &graph)?;
        let mut edges_by_relation: BTreeMap<RelationType, usize> = BTreeMap::new();
        for edge in graph.edges() {
            *edges_by_relation.entry(edge.rel).or_default() += 1;
        }
        Ok(AnalysisSummary {
            candidates: candidate_count,
            confirmed: confirmed_count,
            edges_by_relation,
            redundancy_clusters: graph.redundancy_clusters(),
        })
    }

    /// Rebuilds and persists the search index from the manifest.
    pub fn rebuild_index(&self) -> Result<(), RepositoryError> {
        let _guard = self.store.lock_writes();
        let index = build_index(self.store.manifest().skills.values(), self.embedder.as_ref())?;
        IndexFiles::new(self.store.index_dir())
            .save(&index)
            .map_err(RepositoryError::Index)?;
        self.index.update(|current| {
            *current = index;
            Ok::<_, SearchError>(())
        })?;
        Ok(())
    }
}

fn build_index<'a>(
    entries: impl IntoIterator<Item = &'a ManifestEntry>,
    embedder: &dyn EmbeddingProvider,
) -> Result<SearchIndex, SearchError> {
    let mut index = SearchIndex::new(embedder);
    for entry in entries {
        index.insert(&entry.skill_id, &entry.metadata(), embedder)?;
    }
    Ok(index)
}
