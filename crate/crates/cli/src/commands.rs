//! Subcommand implementations. Each validates its arguments before touching
//! a store, file or network, then returns a [`Report`] for both output
//! formats.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use skillnet_core::creation::{create_from_source, RepoFile, SourceInput, TrajectoryStep};
use skillnet_core::evaluation::evaluate;
use skillnet_core::evaluation::sandbox::SandboxError;
use skillnet_core::evaluation::EvaluationError;
use skillnet_core::graph::Trace;
use skillnet_core::provider::CallCounter;
use skillnet_core::search::{SearchFilter, SearchMode, MAX_TOP_K};
use skillnet_core::skill::{load_package_dir, read_archive, write_package_dir, Category, SkillPackage, Tag, SKILL_FILE};

use crate::backend::{open_local, Backend, Outcome};
use crate::config::{CliConfig, Target};
use crate::error::CliError;
use crate::render;

/// Largest single file read by `create --from-dir`.
pub const MAX_SOURCE_FILE_BYTES: u64 = 1024 * 1024;

pub struct Report {
    pub json: Value,
    pub human: String,
}

impl Report {
    fn new(json: impl Serialize, human: String) -> Self {
        Report {
            json: serde_json::to_value(json).expect("report serializes"),
            human,
        }
    }
}

fn local_root<'a>(config: &'a CliConfig, command: &str) -> Result<&'a Path, CliError> {
    match &config.target {
        Target::Local(root) => Ok(root),
        Target::Remote(_) => Err(CliError::usage(format!("`{command}` works on a local store; pass --store instead of --registry"))),
    }
}

fn existing_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{} is not a directory", dir.display())))
    }
}

fn load_dir(dir: &Path) -> Result<SkillPackage, CliError> {
    existing_dir(dir)?;
    if !dir.join(SKILL_FILE).is_file() {
        return Err(CliError::usage(format!("{} has no {SKILL_FILE}", dir.display())));
    }
    Ok(load_package_dir(dir)?)
}

pub struct SearchRequest {
    pub query: String,
    pub mode: SearchMode,
    pub top_k: usize,
    pub category: Option<String>,
    pub tags: Vec<String>,
}

pub fn search(config: &CliConfig, request: SearchRequest) -> Result<Report, CliError> {
    if request.query.trim().is_empty() {
        return Err(CliError::usage("query is empty"));
    }
    if !(1..=MAX_TOP_K).contains(&request.top_k) {
        return Err(CliError::usage(format!("--top-k must be between 1 and {MAX_TOP_K}")));
    }
    let filter = SearchFilter {
        category: request
            .category
            .as_deref()
            .map(str::parse::<Category>)
            .transpose()
            .map_err(|e| CliError::usage(e.to_string()))?,
        tags: request
            .tags
            .iter()
            .map(|t| Tag::new(t.as_str()))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::usage(e.to_string()))?,
    };
    let backend = Backend::connect(config)?;
    let results = backend
        .search(&request.query, request.mode, request.top_k, &filter)
        .map_err(|e| match e.code() {
            "EmptyQuery" | "InvalidTopK" | "InvalidMode" | "InvalidCategory" | "InvalidTag" => CliError::usage(e.to_string()),
            _ => e,
        })?;
    let human = render::search_table(&results);
    Ok(Report::new(json!({ "results": results }), human))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteStatus {
    Written,
    Unchanged,
}

/// Checks that `dest` may receive a package: absent, empty, or holding a
/// previous package.
fn check_destination(dest: &Path) -> Result<(), CliError> {
    if !dest.exists() {
        return Ok(());
    }
    if !dest.is_dir() {
        return Err(CliError::usage(format!("{} exists and is not a directory", dest.display())));
    }
    let empty = fs::read_dir(dest)?.next().is_none();
    if empty || dest.join(SKILL_FILE).is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{} exists and does not hold a skill package", dest.display())))
    }
}

/// Writes `pkg` to `dest`, replacing a previous package there. Leaves an
/// identical package untouched.
fn install(pkg: &SkillPackage, dest: &Path) -> Result<WriteStatus, CliError> {
    check_destination(dest)?;
    if dest.join(SKILL_FILE).is_file() {
        if let Ok(existing) = load_package_dir(dest) {
            if existing.fingerprint() == pkg.fingerprint() && existing.resources == pkg.resources {
                return Ok(WriteStatus::Unchanged);
            }
        }
    }
    let name = dest.file_name().map_or_else(|| "package".into(), |n| n.to_string_lossy().into_owned());
    let parent = dest.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let staging = parent.join(format!(".{name}.skillnet-staging"));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    write_package_dir(pkg, &staging)?;
    if dest.exists() {
        fs::remove_dir_all(dest)?;
    }
    fs::rename(&staging, dest)?;
    Ok(WriteStatus::Written)
}

pub fn download(config: &CliConfig, skill_id: &str, dest: Option<PathBuf>) -> Result<Report, CliError> {
    if skill_id.trim().is_empty() {
        return Err(CliError::usage("skill id is empty"));
    }
    let dest = dest.unwrap_or_else(|| PathBuf::from(skill_id));
    check_destination(&dest)?;
    let backend = Backend::connect(config)?;
    let entry = backend.metadata(skill_id)?;
    let bytes = backend.archive(skill_id)?;
    let pkg = read_archive(&bytes).map_err(|e| CliError::op("MalformedArchive", e.to_string()))?;
    if pkg.fingerprint() != entry.fingerprint {
        return Err(CliError::op(
            "FingerprintMismatch",
            format!("archive for `{skill_id}` does not match its recorded fingerprint; nothing was written"),
        ));
    }
    let status = install(&pkg, &dest)?;
    let human = format!(
        "{} {skill_id} to {}\n",
        if status == WriteStatus::Written { "downloaded" } else { "already up to date:" },
        dest.display()
    );
    Ok(Report::new(
        json!({ "skill_id": skill_id, "path": dest, "fingerprint": entry.fingerprint, "status": status }),
        human,
    ))
}

pub enum CreateSource {
    Prompt(String),
    Dir(PathBuf),
    Doc(PathBuf),
    Trajectory(PathBuf),
}

fn read_repository(root: &Path) -> Result<Vec<RepoFile>, CliError> {
    let mut files = Vec::new();
    let walker = walkdir::WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.')
    });
    for entry in walker {
        let entry = entry.map_err(|e| CliError::op("Io", e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        if entry.metadata().map_err(|e| CliError::op("Io", e.to_string()))?.len() > MAX_SOURCE_FILE_BYTES {
            tracing::warn!(path = %entry.path().display(), "skipping large file");
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walked path is under root");
        let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        files.push(RepoFile { path, bytes: fs::read(entry.path())? });
    }
    Ok(files)
}

fn source_input(source: CreateSource) -> Result<SourceInput, CliError> {
    let read = |path: &Path| {
        fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
    };
    Ok(match source {
        CreateSource::Prompt(text) => {
            if text.trim().is_empty() {
                return Err(CliError::usage("prompt is empty"));
            }
            SourceInput::Prompt(text)
        }
        CreateSource::Dir(dir) => {
            existing_dir(&dir)?;
            SourceInput::RepositoryTree(read_repository(&dir)?)
        }
        CreateSource::Doc(path) => SourceInput::DocumentText {
            text: read(&path)?,
            filename: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        },
        CreateSource::Trajectory(path) => {
            let steps: Vec<TrajectoryStep> = serde_json::from_str(&read(&path)?).map_err(|e| {
                CliError::usage(format!("{} is not a JSON array of trajectory steps: {e}", path.display()))
            })?;
            SourceInput::TrajectoryLog(steps)
        }
    })
}

pub fn create(config: &CliConfig, source: CreateSource, out: &Path) -> Result<Report, CliError> {
    let source = source_input(source)?;
    let generator = config.providers.generator(&CallCounter::new());
    let packages = create_from_source(&source, generator.as_ref()).map_err(|e| CliError::op("CreationFailed", e.to_string()))?;
    for pkg in &packages {
        check_destination(&out.join(&pkg.id))?;
    }
    let mut created = Vec::new();
    for pkg in &packages {
        let path = out.join(&pkg.id);
        let status = install(pkg, &path)?;
        created.push(json!({ "skill_id": pkg.id, "name": pkg.name(), "path": path, "status": status }));
    }
    let human = render::created(&created);
    Ok(Report::new(json!({ "created": created }), human))
}

pub fn evaluate_dir(config: &CliConfig, dir: &Path) -> Result<Report, CliError> {
    let pkg = load_dir(dir)?;
    let judge = config.providers.judge(&CallCounter::new());
    let sandbox = config.sandbox.build();
    let report = evaluate(&pkg, judge.as_ref(), sandbox.as_ref()).map_err(|e| match e {
        EvaluationError::Sandbox(SandboxError::Unavailable(reason)) => CliError::op(
            "SandboxUnavailable",
            format!("sandbox unavailable ({reason}); rerun with --no-sandbox to grade without running scripts"),
        ),
        EvaluationError::Provider(e) => CliError::op("ProviderUnavailable", e.to_string()),
        other => CliError::op("EvaluationFailed", other.to_string()),
    })?;
    let human = render::evaluation(&report);
    Ok(Report::new(&report, human))
}

pub fn analyze(config: &CliConfig, traces: Option<&Path>) -> Result<Report, CliError> {
    let root = local_root(config, "analyze")?;
    let traces: Vec<Trace> = match traces {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{} is not a JSON array of traces: {e}", path.display())))?
        }
        None => Vec::new(),
    };
    let state = open_local(config, root)?;
    let summary = state.repo.analyze(&traces)?;
    let human = render::analysis(&summary);
    Ok(Report::new(&summary, human))
}

pub fn stats(config: &CliConfig) -> Result<Report, CliError> {
    let stats = Backend::connect(config)?.stats()?;
    let human = render::stats(&stats);
    Ok(Report::new(&stats, human))
}

pub fn contribute(config: &CliConfig, dir: &Path) -> Result<Report, CliError> {
    let pkg = load_dir(dir)?;
    match Backend::connect(config)?.contribute(pkg)? {
        Outcome::Admitted { skill_id, grades } => {
            let human = format!("admitted as {skill_id}\n{}", render::grades(&grades));
            Ok(Report::new(json!({ "status": "admitted", "skill_id": skill_id, "grades": grades }), human))
        }
        Outcome::Duplicate { existing_id } => Ok(Report::new(
            json!({ "status": "duplicate", "existing_id": existing_id }),
            format!("already stored as {existing_id}\n"),
        )),
        Outcome::Rejected { message, report } => Err(CliError::Operational {
            code: "Rejected".into(),
            message,
            details: Some(json!({ "report": report })),
        }),
    }
}

/// Runs the registry service on `bind` until Ctrl-C.
pub fn serve(config: &CliConfig, bind: Option<SocketAddr>, announce: impl FnOnce(SocketAddr)) -> Result<(), CliError> {
    let root = local_root(config, "serve")?;
    let state = open_local(config, root)?;
    let bind = bind.unwrap_or(config.bind);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| CliError::op("BindFailed", format!("cannot listen on {bind}: {e}")))?;
        announce(listener.local_addr()?);
        skillnet_registry::serve(listener, state, skillnet_registry::ctrl_c()).await?;
        Ok(())
    })
}
