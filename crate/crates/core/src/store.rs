//! Filesystem skill store.
//!
//! ```text
//! <root>/
//!   manifest.json        id -> metadata, fingerprint, grades, timestamps
//!   skills/<id>/         one extracted package per admitted skill
//!   graph.txt            relation graph
//!   index/               search index files
//! ```
//!
//! Writes go through one writer lock. A package directory is staged under
//! `skills/.staging-*` and renamed into place before the manifest is
//! replaced (also by write-then-rename), so an interrupted write leaves
//! either the old state or the new one; [`SkillStore::open`] removes the
//! leftovers.
//!
//! Reads are split into metadata reads (manifest only) and document reads
//! (package files), each counted, so callers can check which kind a code
//! path performs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{aggregate_distribution, EvaluationReport, Grades, GradeDistribution};
use crate::graph::{load_graph, serialize_graph, GraphError, SkillGraph};
use crate::skill::{
    load_package_dir, write_archive, write_package_dir, Category, Fingerprint, SkillError,
    SkillMetadata, SkillPackage, Tag,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "skillnet-manifest/1";
pub const SKILLS_DIR: &str = "skills";
pub const GRAPH_FILE: &str = "graph.txt";
pub const INDEX_DIR: &str = "index";
const STAGING_PREFIX: &str = ".staging-";
const TMP_SUFFIX: &str = ".tmp";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("skill already stored as `{existing_id}`")]
    Duplicate { existing_id: String },
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub skill_id: String,
    pub name: String,
    pub description: String,
    pub category: Category,
    pub tags: Vec<Tag>,
    pub version: String,
    pub fingerprint: Fingerprint,
    pub grades: Grades,
    pub judge_identity: String,
    pub admitted_at: u64,
    pub updated_at: u64,
}

impl ManifestEntry {
    /// Metadata view with the curated category and tags.
    pub fn metadata(&self) -> SkillMetadata {
        SkillMetadata {
            name: self.name.clone(),
            description: self.description.clone(),
            category: self.category,
            tags: self.tags.clone(),
            version: self.version.clone(),
            usage_conditions: None,
        }
    }

    pub fn as_report(&self) -> EvaluationReport {
        EvaluationReport {
            skill_id: self.skill_id.clone(),
            grades: self.grades.clone(),
            sandbox: None,
            judge_identity: self.judge_identity.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub skills: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    fn empty() -> Self {
        Manifest {
            format: MANIFEST_FORMAT.into(),
            skills: BTreeMap::new(),
        }
    }

    pub fn find_fingerprint(&self, fingerprint: &Fingerprint) -> Option<&ManifestEntry> {
        self.skills.values().find(|e| &e.fingerprint == fingerprint)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub total_skills: usize,
    pub per_category: BTreeMap<Category, usize>,
    pub per_dimension: GradeDistribution,
}

impl StoreStats {
    pub fn from_manifest(manifest: &Manifest) -> Self {
        let mut per_category: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
        for entry in manifest.skills.values() {
            *per_category.get_mut(&entry.category).expect("all categories present") += 1;
        }
        let reports: Vec<EvaluationReport> = manifest.skills.values().map(ManifestEntry::as_report).collect();
        let per_dimension: GradeDistribution = aggregate_distribution(&reports);
        StoreStats {
            total_skills: manifest.skills.len(),
            per_category,
            per_dimension,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounts {
    pub metadata_reads: u64,
    pub document_reads: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Problem {
    MissingDirectory(String),
    OrphanDirectory(String),
    Unreadable { skill_id: String, reason: String },
    FingerprintMismatch(String),
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(TMP_SUFFIX);
    let tmp = PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Debug)]
pub struct SkillStore {
    root: PathBuf,
    manifest: RwLock<Arc<Manifest>>,
    writer: Mutex<()>,
    metadata_reads: AtomicU64,
    document_reads: AtomicU64,
}

impl SkillStore {
    /// Opens (creating if needed) the store at `root` and removes leftovers
    /// of interrupted writes.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join(SKILLS_DIR))?;
        let manifest_path = root.join(MANIFEST_FILE);
        let manifest = if manifest_path.exists() {
            let manifest: Manifest = serde_json::from_slice(&fs::read(&manifest_path)?)
                .map_err(|e| StoreError::Corrupt(format!("{MANIFEST_FILE}: {e}")))?;
            if manifest.format != MANIFEST_FORMAT {
                return Err(StoreError::Corrupt(format!("unknown manifest format `{}`", manifest.format)));
            }
            manifest
        } else {
            Manifest::empty()
        };
        let store = SkillStore {
            root,
            manifest: RwLock::new(Arc::new(manifest)),
            writer: Mutex::new(()),
            metadata_reads: AtomicU64::new(0),
            document_reads: AtomicU64::new(0),
        };
        store.recover()?;
        Ok(store)
    }

    fn recover(&self) -> Result<(), StoreError> {
        let manifest = self.manifest_snapshot();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.file_name().to_string_lossy().ends_with(TMP_SUFFIX) {
                fs::remove_file(entry.path())?;
            }
        }
        for entry in fs::read_dir(self.skills_dir())? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let leftover = name.starts_with(STAGING_PREFIX) || !manifest.skills.contains_key(&name);
            if leftover {
                tracing::warn!(entry = %name, "removing leftover package directory");
                if entry.file_type()?.is_dir() {
                    fs::remove_dir_all(entry.path())?;
                } else {
                    fs::remove_file(entry.path())?;
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn skills_dir(&self) -> PathBuf {
        self.root.join(SKILLS_DIR)
    }

    pub fn package_dir(&self, skill_id: &str) -> PathBuf {
        self.skills_dir().join(skill_id)
    }

    pub fn index_dir(&self) -> PathBuf {
        self.root.join(INDEX_DIR)
    }

    pub fn graph_path(&self) -> PathBuf {
        self.root.join(GRAPH_FILE)
    }

    fn manifest_snapshot(&self) -> Arc<Manifest> {
        Arc::clone(&self.manifest.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Exclusive write access; hold it across a read-modify-write sequence.
    pub fn lock_writes(&self) -> MutexGuard<'_, ()> {
        self.writer.lock().unwrap_or_else(|e| e.into_inner())
    }

    // ---- metadata reads ----

    pub fn manifest(&self) -> Arc<Manifest> {
        self.metadata_reads.fetch_add(1, Ordering::Relaxed);
        self.manifest_snapshot()
    }

    pub fn metadata(&self, skill_id: &str) -> Result<ManifestEntry, StoreError> {
        self.metadata_reads.fetch_add(1, Ordering::Relaxed);
        self.manifest_snapshot()
            .skills
            .get(skill_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSkill(skill_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.manifest_snapshot().skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, skill_id: &str) -> bool {
        self.manifest_snapshot().skills.contains_key(skill_id)
    }

    pub fn stats(&self) -> StoreStats {
        StoreStats::from_manifest(&self.manifest())
    }

    // ---- document reads ----

    pub fn load_package(&self, skill_id: &str) -> Result<SkillPackage, StoreError> {
        if !self.contains(skill_id) {
            return Err(StoreError::UnknownSkill(skill_id.to_string()));
        }
        self.document_reads.fetch_add(1, Ordering::Relaxed);
        let mut pkg = load_package_dir(&self.package_dir(skill_id))?;
        pkg.id = skill_id.to_string();
        Ok(pkg)
    }

    pub fn archive(&self, skill_id: &str) -> Result<Vec<u8>, StoreError> {
        Ok(write_archive(&self.load_package(skill_id)?)?)
    }

    pub fn access_counts(&self) -> AccessCounts {
        AccessCounts {
            metadata_reads: self.metadata_reads.load(Ordering::Relaxed),
            document_reads: self.document_reads.load(Ordering::Relaxed),
        }
    }

    // ---- writes (caller holds `lock_writes`) ----

    /// Id under which `pkg` would be stored: its own id, or the id with the
    /// first 8 hex digits of the structure hash appended when a different
    /// package already holds that id. `Duplicate` if an identical package
    /// is already stored.
    pub fn placement(&self, pkg: &SkillPackage) -> Result<String, StoreError> {
        let manifest = self.manifest_snapshot();
        let fingerprint = pkg.fingerprint();
        if let Some(existing) = manifest.find_fingerprint(&fingerprint) {
            return Err(StoreError::Duplicate {
                existing_id: existing.skill_id.clone(),
            });
        }
        if !manifest.skills.contains_key(&pkg.id) {
            return Ok(pkg.id.clone());
        }
        let alternative = format!("{}-{}", pkg.id, &fingerprint.structure_hash[..8]);
        if manifest.skills.contains_key(&alternative) {
            return Err(StoreError::Corrupt(format!("id `{alternative}` is taken by a different package")));
        }
        Ok(alternative)
    }

    /// Stores `pkg` under `skill_id` (from [`SkillStore::placement`]).
    pub fn insert(
        &self,
        _guard: &MutexGuard<'_, ()>,
        skill_id: &str,
        pkg: &SkillPackage,
        category: Category,
        tags: &[Tag],
        evaluation: &EvaluationReport,
    ) -> Result<ManifestEntry, StoreError> {
        let staging = self.skills_dir().join(format!("{STAGING_PREFIX}{skill_id}"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        write_package_dir(pkg, &staging)?;
        let target = self.package_dir(skill_id);
        if target.exists() {
            fs::remove_dir_all(&target)?;
        }
        fs::rename(&staging, &target)?;

        let now = unix_now();
        let meta = &pkg.document.metadata;
        let entry = ManifestEntry {
            skill_id: skill_id.to_string(),
            name: meta.name.clone(),
            description: meta.description.clone(),
            category,
            tags: tags.to_vec(),
            version: meta.version.clone(),
            fingerprint: pkg.fingerprint(),
            grades: evaluation.grades.clone(),
            judge_identity: evaluation.judge_identity.clone(),
            admitted_at: now,
            updated_at: now,
        };
        let mut next = Manifest::clone(&self.manifest_snapshot());
        next.skills.insert(skill_id.to_string(), entry.clone());
        self.publish(next)?;
        Ok(entry)
    }

    /// Removes a skill: manifest first, then its directory.
    pub fn remove(&self, _guard: &MutexGuard<'_, ()>, skill_id: &str) -> Result<(), StoreError> {
        let mut next = Manifest::clone(&self.manifest_snapshot());
        if next.skills.remove(skill_id).is_none() {
            return Err(StoreError::UnknownSkill(skill_id.to_string()));
        }
        self.publish(next)?;
        let dir = self.package_dir(skill_id);
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        Ok(())
    }

    fn publish(&self, manifest: Manifest) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec_pretty(&manifest).map_err(io::Error::other)?;
        write_atomic(&self.root.join(MANIFEST_FILE), &bytes)?;
        *self.manifest.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(manifest);
        Ok(())
    }

    pub fn load_graph(&self) -> Result<SkillGraph, StoreError> {
        match fs::read_to_string(self.graph_path()) {
            Ok(text) => Ok(load_graph(&text)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(SkillGraph::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save_graph(&self, _guard: &MutexGuard<'_, ()>, graph: &SkillGraph) -> Result<(), StoreError> {
        write_atomic(&self.graph_path(), serialize_graph(graph).as_bytes())?;
        Ok(())
    }

    /// Checks that manifest entries and package directories correspond and
    /// that every stored package still has its recorded fingerprint. Counts
    /// as document reads.
    pub fn validate(&self) -> Result<Vec<Problem>, StoreError> {
        let manifest = self.manifest_snapshot();
        let mut problems = Vec::new();
        for (id, entry) in &manifest.skills {
            let dir = self.package_dir(id);
            if !dir.is_dir() {
                problems.push(Problem::MissingDirectory(id.clone()));
                continue;
            }
            self.document_reads.fetch_add(1, Ordering::Relaxed);
            match load_package_dir(&dir) {
                Ok(pkg) if pkg.fingerprint() != entry.fingerprint => {
                    problems.push(Problem::FingerprintMismatch(id.clone()))
                }
                Ok(_) => {}
                Err(e) => problems.push(Problem::Unreadable {
                    skill_id: id.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        for entry in fs::read_dir(self.skills_dir())? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if !manifest.skills.contains_key(&name) {
                problems.push(Problem::OrphanDirectory(name));
            }
        }
        Ok(problems)
    }
}
