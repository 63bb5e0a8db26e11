//! Turning raw sources (trajectories, repositories, documents, prompts) into
//! candidate skill packages.

mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{CallCounter, HttpEndpoint, JsonClient, ProviderError};
use crate::skill::{
    normalize_path, parse_skill_document, validate_package, Resource, SkillPackage,
};

pub use template::{imperative_phrase, name_from_phrase, TemplateGenerator, MAX_REPOSITORY_PACKAGES};

pub const DRAFT_SCHEMA_VERSION: &str = "skill-draft/1";
pub const SOURCE_KEY: &str = "source";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub actor: String,
    pub action: String,
    #[serde(default)]
    pub observation: String,
}

/// A repository file. On the wire the content travels as (lossy) UTF-8 text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct RepoFileWire {
    path: String,
    content: String,
}

impl Serialize for RepoFile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RepoFileWire {
            path: self.path.clone(),
            content: String::from_utf8_lossy(&self.bytes).into_owned(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RepoFile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = RepoFileWire::deserialize(d)?;
        Ok(RepoFile {
            path: wire.path,
            bytes: wire.content.into_bytes(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum SourceInput {
    TrajectoryLog(Vec<TrajectoryStep>),
    RepositoryTree(Vec<RepoFile>),
    DocumentText { text: String, filename: String },
    Prompt(String),
}

impl SourceInput {
    pub fn kind(&self) -> &'static str {
        match self {
            SourceInput::TrajectoryLog(_) => "trajectory_log",
            SourceInput::RepositoryTree(_) => "repository_tree",
            SourceInput::DocumentText { .. } => "document_text",
            SourceInput::Prompt(_) => "prompt",
        }
    }

    /// MD5 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("source serializes");
        crate::skill::md5_hex(&json)
    }

    /// `<kind>:<digest>`, recorded in each generated package.
    pub fn provenance(&self) -> String {
        format!("{}:{}", self.kind(), self.digest())
    }

    /// Repository paths must be valid resource paths.
    fn check(&self) -> Result<(), CreationError> {
        if let SourceInput::RepositoryTree(files) = self {
            for file in files {
                normalize_path(&file.path)
                    .map_err(|e| CreationError::InvalidSource(e.to_string()))?;
            }
        }
        Ok(())
    }
}

/// A frontmatter value: plain text, or a list (joined with `, `).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrontmatterValue {
    Text(String),
    List(Vec<String>),
}

impl FrontmatterValue {
    fn render(&self) -> String {
        match self {
            FrontmatterValue::Text(t) => t.clone(),
            FrontmatterValue::List(items) => items.join(", "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftResource {
    pub path: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    pub frontmatter: BTreeMap<String, FrontmatterValue>,
    pub instructions: String,
    #[serde(default)]
    pub resources: Vec<DraftResource>,
}

const KNOWN_KEYS: [&str; 6] = ["name", "description", "category", "tags", "version", "usage_conditions"];

impl Draft {
    /// `SKILL.md` text: known keys first in canonical order, the rest sorted.
    pub fn render(&self) -> String {
        let mut out = String::from("---\n");
        let known = KNOWN_KEYS.iter().filter_map(|k| self.frontmatter.get_key_value(*k));
        let rest = self
            .frontmatter
            .iter()
            .filter(|(k, _)| !KNOWN_KEYS.contains(&k.as_str()));
        for (key, value) in known.chain(rest) {
            out.push_str(&format!("{key}: {}\n", value.render()));
        }
        out.push_str("---\n");
        out.push_str(&self.instructions);
        out
    }

    /// Builds the package, stamping `source` provenance into the frontmatter.
    pub fn into_package(self, provenance: &str) -> Result<SkillPackage, String> {
        let mut doc = parse_skill_document(self.render().as_bytes()).map_err(|e| e.to_string())?;
        doc.set_extra(SOURCE_KEY, provenance);
        let resources = self
            .resources
            .into_iter()
            .map(|r| Resource::new(r.path, r.content.into_bytes()))
            .collect();
        let pkg = SkillPackage::new(doc, resources).map_err(|e| e.to_string())?;
        let validation = validate_package(&pkg);
        if validation.is_ok() {
            Ok(pkg)
        } else {
            Err(validation
                .violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "))
        }
    }
}

pub trait GeneratorProvider: Send + Sync {
    fn identity(&self) -> String;

    /// Whether `generate` may be called from several threads at once.
    fn concurrent_safe(&self) -> bool {
        true
    }

    fn generate(&self, source: &SourceInput) -> Result<Vec<Draft>, ProviderError>;
}

/// Tries `primary` and falls back to the offline templates when it is
/// unreachable or answers with something unusable.
pub struct GenerateWithFallback<G> {
    pub primary: G,
    pub fallback: TemplateGenerator,
}

impl<G: GeneratorProvider> GenerateWithFallback<G> {
    pub fn new(primary: G) -> Self {
        GenerateWithFallback {
            primary,
            fallback: TemplateGenerator,
        }
    }
}

impl<G: GeneratorProvider> GeneratorProvider for GenerateWithFallback<G> {
    fn identity(&self) -> String {
        format!("{}+{}", self.primary.identity(), self.fallback.identity())
    }

    fn concurrent_safe(&self) -> bool {
        self.primary.concurrent_safe()
    }

    fn generate(&self, source: &SourceInput) -> Result<Vec<Draft>, ProviderError> {
        self.primary.generate(source).or_else(|e| {
            tracing::warn!(error = %e, "generator unavailable, using templates");
            self.fallback.generate(source)
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CreationError {
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no usable skill could be generated from the source")]
    EmptyGeneration,
}

/// Generates packages from `source`. Drafts that do not form a valid package
/// are dropped (and logged); if none remain the result is `EmptyGeneration`.
pub fn create_from_source(
    source: &SourceInput,
    provider: &dyn GeneratorProvider,
) -> Result<Vec<SkillPackage>, CreationError> {
    source.check()?;
    let provenance = source.provenance();
    let drafts = provider.generate(source)?;
    let packages: Vec<SkillPackage> = drafts
        .into_iter()
        .filter_map(|draft| match draft.into_package(&provenance) {
            Ok(pkg) => Some(pkg),
            Err(reason) => {
                tracing::warn!(provider = %provider.identity(), %reason, "dropping invalid draft");
                None
            }
        })
        .collect();
    if packages.is_empty() {
        Err(CreationError::EmptyGeneration)
    } else {
        Ok(packages)
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    #[serde(flatten)]
    source: &'a SourceInput,
    schema_version: &'a str,
}

#[derive(Deserialize)]
struct GenerateResponse {
    drafts: Vec<Draft>,
}

/// Generator reached over HTTP: posts `{kind, payload, schema_version}` and
/// expects `{drafts: [{frontmatter, instructions, resources}]}`.
pub struct RemoteGenerator {
    name: String,
    client: JsonClient,
}

impl RemoteGenerator {
    pub fn new(name: impl Into<String>, endpoint: HttpEndpoint, counter: CallCounter) -> Self {
        RemoteGenerator {
            name: name.into(),
            client: JsonClient::new(endpoint, counter),
        }
    }
}

impl GeneratorProvider for RemoteGenerator {
    fn identity(&self) -> String {
        format!("remote:{}", self.name)
    }

    fn generate(&self, source: &SourceInput) -> Result<Vec<Draft>, ProviderError> {
        let response: GenerateResponse = self.client.post(&GenerateRequest {
            source,
            schema_version: DRAFT_SCHEMA_VERSION,
        })?;
        Ok(response.drafts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_wire_shape() {
        let json = serde_json::to_value(SourceInput::Prompt("hi".into())).unwrap();
        assert_eq!(json, serde_json::json!({"kind": "prompt", "payload": "hi"}));
        let repo = SourceInput::RepositoryTree(vec![RepoFile { path: "a.sh".into(), bytes: b"echo".to_vec() }]);
        let json = serde_json::to_value(&repo).unwrap();
        assert_eq!(json["payload"][0]["content"], "echo");
        let back: SourceInput = serde_json::from_value(json).unwrap();
        assert_eq!(back, repo);
        let req = serde_json::to_value(GenerateRequest { source: &repo, schema_version: DRAFT_SCHEMA_VERSION }).unwrap();
        assert_eq!(req["kind"], "repository_tree");
        assert_eq!(req["schema_version"], DRAFT_SCHEMA_VERSION);
    }

    #[test]
    fn draft_rendering_order() {
        let mut fm = BTreeMap::new();
        fm.insert("zeta".into(), FrontmatterValue::Text("z".into()));
        fm.insert("tags".into(), FrontmatterValue::List(vec!["a".into(), "b".into()]));
        fm.insert("description".into(), FrontmatterValue::Text("Does a thing".into()));
        fm.insert("name".into(), FrontmatterValue::Text("thing".into()));
        let draft = Draft { frontmatter: fm, instructions: "1. Go.\n".into(), resources: vec![] };
        assert_eq!(draft.render(), "---\nname: thing\ndescription: Does a thing\ntags: a, b\nzeta: z\n---\n1. Go.\n");
        let pkg = draft.into_package("prompt:abc").unwrap();
        assert_eq!(pkg.document.extra_value(SOURCE_KEY), Some("prompt:abc"));
    }

    struct Canned(Vec<Draft>);

    impl GeneratorProvider for Canned {
        fn identity(&self) -> String {
            "canned".into()
        }
        fn generate(&self, _source: &SourceInput) -> Result<Vec<Draft>, ProviderError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn invalid_drafts_are_dropped() {
        let bad = Draft { frontmatter: BTreeMap::new(), instructions: "x".into(), resources: vec![] };
        let err = create_from_source(&SourceInput::Prompt("p".into()), &Canned(vec![bad])).unwrap_err();
        assert_eq!(err, CreationError::EmptyGeneration);
    }

    #[test]
    fn bad_repository_paths_are_rejected() {
        let src = SourceInput::RepositoryTree(vec![RepoFile { path: "../x.sh".into(), bytes: vec![] }]);
        assert!(matches!(
            create_from_source(&src, &TemplateGenerator),
            Err(CreationError::InvalidSource(_))
        ));
    }

    #[test]
    fn fallback_generator_uses_templates() {
        let mut endpoint = HttpEndpoint::new("http://127.0.0.1:9/generate");
        endpoint.retries = 0;
        let gen = GenerateWithFallback::new(RemoteGenerator::new("down", endpoint, CallCounter::new()));
        let pkgs = create_from_source(&SourceInput::Prompt("Summarize a research paper into key findings".into()), &gen)
            .unwrap();
        assert_eq!(pkgs.len(), 1);
    }

    #[test]
    fn unreachable_remote_is_unavailable() {
        let mut endpoint = HttpEndpoint::new("http://127.0.0.1:9/generate");
        endpoint.retries = 0;
        let gen = RemoteGenerator::new("down", endpoint, CallCounter::new());
        assert!(matches!(
            create_from_source(&SourceInput::Prompt("p".into()), &gen),
            Err(CreationError::Provider(ProviderError::Unavailable(_)))
        ));
    }
}
