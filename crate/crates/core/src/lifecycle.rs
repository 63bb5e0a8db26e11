//! Discovery, activation and execution of stored skills.
//!
//! Discovery works from the search index alone and never loads a package
//! document. Activation loads the full document and lists its resources.
//! Execution materializes the package in a sandbox and reports its cost.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::sandbox::{Sandbox, SandboxError, SandboxLimits, SandboxResult};
use crate::graph::{GraphError, SkillGraph};
use crate::provider::CallCounter;
use crate::repository::{Repository, RepositoryError};
use crate::search::{SearchError, SearchFilter, SearchMode};
use crate::skill::SkillPackage;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum LifecycleError {
    #[error("task text has no searchable tokens")]
    EmptyQuery,
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("skill `{0}` has no entry point; follow its instructions instead")]
    NoEntryPoint(String),
    #[error("dependency cycle: {}", .0.join(" -> "))]
    DependencyCycle(Vec<String>),
    #[error("sandbox unavailable: {0}")]
    SandboxUnavailable(String),
    #[error("execution limits must be positive")]
    InvalidLimits,
    #[error(transparent)]
    Repository(RepositoryError),
    #[error(transparent)]
    Sandbox(SandboxError),
}

impl From<RepositoryError> for LifecycleError {
    fn from(e: RepositoryError) -> Self {
        match e {
            RepositoryError::Search(SearchError::EmptyQuery) => LifecycleError::EmptyQuery,
            RepositoryError::Store(StoreError::UnknownSkill(id)) => LifecycleError::UnknownSkill(id),
            other => LifecycleError::Repository(other),
        }
    }
}

impl From<SandboxError> for LifecycleError {
    fn from(e: SandboxError) -> Self {
        match e {
            SandboxError::Unavailable(reason) => LifecycleError::SandboxUnavailable(reason),
            SandboxError::InvalidLimits => LifecycleError::InvalidLimits,
            other => LifecycleError::Sandbox(other),
        }
    }
}

/// What an agent sees at discovery time: metadata, never instructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryCandidate {
    pub skill_id: String,
    pub name: String,
    pub description: String,
    pub relevance_score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceInfo {
    pub path: String,
    pub size: u64,
}

/// A skill loaded for use. Resources are listed but not yet written
/// anywhere; that happens at execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActivatedSkill {
    pub skill_id: String,
    pub instructions: String,
    pub resources: Vec<ResourceInfo>,
    pub entry: Option<String>,
    #[serde(skip)]
    package: SkillPackage,
}

impl ActivatedSkill {
    pub fn from_package(pkg: SkillPackage) -> Self {
        ActivatedSkill {
            skill_id: pkg.id.clone(),
            instructions: pkg.document.instructions.clone(),
            resources: pkg
                .resources
                .iter()
                .map(|r| ResourceInfo {
                    path: r.path.clone(),
                    size: r.bytes.len() as u64,
                })
                .collect(),
            entry: pkg.document.entry().map(str::to_string),
            package: pkg,
        }
    }

    pub fn package(&self) -> &SkillPackage {
        &self.package
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRecord {
    pub wall_time_ms: u64,
    pub peak_memory_bytes: u64,
    pub external_call_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Execution {
    pub result: SandboxResult,
    pub cost: CostRecord,
    /// Prerequisites resolved from the graph, ending with the skill itself.
    pub plan: Vec<String>,
}

/// Skills relevant to `task_text`, by hybrid search over metadata.
pub fn discover(repo: &Repository, task_text: &str, top_k: usize) -> Result<Vec<DiscoveryCandidate>, LifecycleError> {
    if task_text.trim().is_empty() {
        return Err(LifecycleError::EmptyQuery);
    }
    let results = repo.search(task_text, SearchMode::Hybrid, top_k, &SearchFilter::any())?;
    Ok(results
        .into_iter()
        .map(|r| DiscoveryCandidate {
            skill_id: r.skill_id,
            name: r.name,
            description: r.description,
            relevance_score: r.score,
        })
        .collect())
}

pub fn activate(repo: &Repository, skill_id: &str) -> Result<ActivatedSkill, LifecycleError> {
    let pkg = repo.store().load_package(skill_id).map_err(RepositoryError::from)?;
    Ok(ActivatedSkill::from_package(pkg))
}

#[derive(Clone, Copy)]
pub struct ExecutionContext<'a> {
    pub sandbox: &'a Sandbox,
    /// When given, the skill's `DependOn` prerequisites must form a DAG.
    pub graph: Option<&'a SkillGraph>,
    /// Provider calls made during the run are attributed to it.
    pub calls: Option<&'a CallCounter>,
}

/// Runs the activated skill's entry script with `args` under `limits`.
pub fn execute(
    activated: &ActivatedSkill,
    args: &[String],
    limits: SandboxLimits,
    ctx: ExecutionContext<'_>,
) -> Result<Execution, LifecycleError> {
    let started = Instant::now();
    if limits.wall_ms == 0 || limits.mem_bytes == 0 {
        return Err(LifecycleError::InvalidLimits);
    }
    let plan = match ctx.graph {
        Some(graph) => match graph.execution_plan(&activated.skill_id) {
            Ok(plan) => plan,
            Err(GraphError::DependencyCycle(cycle)) => return Err(LifecycleError::DependencyCycle(cycle)),
            Err(GraphError::UnknownNode(_)) => vec![activated.skill_id.clone()],
            Err(e) => return Err(LifecycleError::Repository(e.into())),
        },
        None => vec![activated.skill_id.clone()],
    };
    let has_entry = activated
        .entry
        .as_deref()
        .is_some_and(|entry| activated.package.resource(entry).is_some());
    if !has_entry {
        return Err(LifecycleError::NoEntryPoint(activated.skill_id.clone()));
    }
    let calls_before = ctx.calls.map_or(0, CallCounter::get);
    let result = ctx.sandbox.with_limits(limits).run(&activated.package, args)?;
    let cost = CostRecord {
        wall_time_ms: (started.elapsed().as_millis() as u64).max(result.wall_time_ms),
        peak_memory_bytes: result.peak_memory_bytes,
        external_call_count: ctx.calls.map_or(0, CallCounter::get) - calls_before,
    };
    Ok(Execution { result, cost, plan })
}
