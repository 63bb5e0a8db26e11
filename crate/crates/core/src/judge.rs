//! Pluggable grading and inference backends.
//!
//! A [`JudgeProvider`] grades skills, assigns categories/tags and confirms
//! candidate relations. [`RuleJudge`] is the deterministic offline backend;
//! [`RemoteJudge`] speaks the HTTP wire contract; [`WithFallback`] tries a
//! primary judge and falls back to the rules when it is unreachable.

use serde::{Deserialize, Serialize};

use crate::curation::{categorize_fallback, CategoryTable};
use crate::evaluation::rubric::{self, RUBRIC_VERSION};
use crate::evaluation::sandbox::SandboxResult;
use crate::evaluation::{Dimension, GradeEntry, Grades};
use crate::graph::{Edge, RelationType};
use crate::provider::{CallCounter, HttpEndpoint, JsonClient, ProviderError};
use crate::skill::{Category, SkillPackage, Tag};

/// Confidence at or above which the rule judge accepts a candidate relation.
pub const FALLBACK_RELATION_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradeSheet {
    pub grades: Grades,
    pub judge_identity: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "rel", rename_all = "snake_case")]
pub enum RelationVerdict {
    Accept,
    Reject,
    Retype(RelationType),
}

pub trait JudgeProvider: Send + Sync {
    fn identity(&self) -> String;

    fn grade(
        &self,
        pkg: &SkillPackage,
        sandbox: Option<&SandboxResult>,
    ) -> Result<GradeSheet, ProviderError>;

    fn categorize(&self, _pkg: &SkillPackage) -> Result<(Category, Vec<Tag>), ProviderError> {
        Err(ProviderError::Unavailable(format!(
            "{} does not categorize",
            self.identity()
        )))
    }

    fn confirm_relation(&self, _candidate: &Edge) -> Result<RelationVerdict, ProviderError> {
        Err(ProviderError::Unavailable(format!(
            "{} does not judge relations",
            self.identity()
        )))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RuleJudge {
    table: CategoryTable,
}

impl RuleJudge {
    pub fn with_table(table: CategoryTable) -> Self {
        RuleJudge { table }
    }
}

impl JudgeProvider for RuleJudge {
    fn identity(&self) -> String {
        RUBRIC_VERSION.to_string()
    }

    fn grade(
        &self,
        pkg: &SkillPackage,
        sandbox: Option<&SandboxResult>,
    ) -> Result<GradeSheet, ProviderError> {
        Ok(GradeSheet {
            grades: rubric::grade(pkg, sandbox),
            judge_identity: self.identity(),
        })
    }

    fn categorize(&self, pkg: &SkillPackage) -> Result<(Category, Vec<Tag>), ProviderError> {
        Ok(categorize_fallback(&self.table, pkg))
    }

    fn confirm_relation(&self, candidate: &Edge) -> Result<RelationVerdict, ProviderError> {
        Ok(if candidate.confidence >= FALLBACK_RELATION_THRESHOLD {
            RelationVerdict::Accept
        } else {
            RelationVerdict::Reject
        })
    }
}

/// Tries `primary`; on any provider error answers with the rule judge.
pub struct WithFallback<J> {
    pub primary: J,
    pub fallback: RuleJudge,
}

impl<J: JudgeProvider> WithFallback<J> {
    pub fn new(primary: J) -> Self {
        WithFallback {
            primary,
            fallback: RuleJudge::default(),
        }
    }
}

impl<J: JudgeProvider> JudgeProvider for WithFallback<J> {
    fn identity(&self) -> String {
        format!("{}+{}", self.primary.identity(), self.fallback.identity())
    }

    fn grade(
        &self,
        pkg: &SkillPackage,
        sandbox: Option<&SandboxResult>,
    ) -> Result<GradeSheet, ProviderError> {
        self.primary.grade(pkg, sandbox).or_else(|e| {
            tracing::warn!(error = %e, "judge unavailable, grading with rules");
            self.fallback.grade(pkg, sandbox)
        })
    }

    fn categorize(&self, pkg: &SkillPackage) -> Result<(Category, Vec<Tag>), ProviderError> {
        self.primary
            .categorize(pkg)
            .or_else(|_| self.fallback.categorize(pkg))
    }

    fn confirm_relation(&self, candidate: &Edge) -> Result<RelationVerdict, ProviderError> {
        self.primary
            .confirm_relation(candidate)
            .or_else(|_| self.fallback.confirm_relation(candidate))
    }
}

impl<J: JudgeProvider + ?Sized> JudgeProvider for &J {
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn grade(
        &self,
        pkg: &SkillPackage,
        sandbox: Option<&SandboxResult>,
    ) -> Result<GradeSheet, ProviderError> {
        (**self).grade(pkg, sandbox)
    }
    fn categorize(&self, pkg: &SkillPackage) -> Result<(Category, Vec<Tag>), ProviderError> {
        (**self).categorize(pkg)
    }
    fn confirm_relation(&self, candidate: &Edge) -> Result<RelationVerdict, ProviderError> {
        (**self).confirm_relation(candidate)
    }
}

#[derive(Debug, Serialize)]
struct GradeRequest<'a> {
    skill_document: &'a str,
    rubric_version: &'a str,
}

#[derive(Debug, Deserialize)]
struct GradeResponse {
    grades: Grades,
}

#[derive(Debug, Serialize)]
struct CategorizeRequest<'a> {
    skill_document: &'a str,
}

#[derive(Debug, Deserialize)]
struct CategorizeResponse {
    category: Category,
    tags: Vec<Tag>,
}

/// Judge reached over HTTP.
///
/// Grading posts `{skill_document, rubric_version}` and expects
/// `{grades: {<Dimension>: {level, rationale}}}`. Categorization and relation
/// confirmation are optional endpoints.
pub struct RemoteJudge {
    name: String,
    grade_client: JsonClient,
    categorize_client: Option<JsonClient>,
    relation_client: Option<JsonClient>,
}

impl RemoteJudge {
    pub fn new(name: impl Into<String>, grade: HttpEndpoint, counter: CallCounter) -> Self {
        RemoteJudge {
            name: name.into(),
            grade_client: JsonClient::new(grade, counter),
            categorize_client: None,
            relation_client: None,
        }
    }

    pub fn with_categorize(mut self, endpoint: HttpEndpoint, counter: CallCounter) -> Self {
        self.categorize_client = Some(JsonClient::new(endpoint, counter));
        self
    }

    pub fn with_relations(mut self, endpoint: HttpEndpoint, counter: CallCounter) -> Self {
        self.relation_client = Some(JsonClient::new(endpoint, counter));
        self
    }
}

impl JudgeProvider for RemoteJudge {
    fn identity(&self) -> String {
        format!("remote:{}", self.name)
    }

    fn grade(
        &self,
        pkg: &SkillPackage,
        _sandbox: Option<&SandboxResult>,
    ) -> Result<GradeSheet, ProviderError> {
        let document = String::from_utf8_lossy(&pkg.skill_md);
        let response: GradeResponse = self.grade_client.post(&GradeRequest {
            skill_document: &document,
            rubric_version: RUBRIC_VERSION,
        })?;
        for dim in Dimension::ALL {
            match response.grades.get(&dim) {
                Some(GradeEntry { rationale, .. }) if !rationale.trim().is_empty() => {}
                _ => {
                    return Err(ProviderError::InvalidResponse(format!(
                        "missing grade or rationale for {dim}"
                    )))
                }
            }
        }
        Ok(GradeSheet {
            grades: response.grades,
            judge_identity: self.identity(),
        })
    }

    fn categorize(&self, pkg: &SkillPackage) -> Result<(Category, Vec<Tag>), ProviderError> {
        let client = self.categorize_client.as_ref().ok_or_else(|| {
            ProviderError::Unavailable("no categorize endpoint configured".into())
        })?;
        let document = String::from_utf8_lossy(&pkg.skill_md);
        let response: CategorizeResponse = client.post(&CategorizeRequest {
            skill_document: &document,
        })?;
        if response.tags.is_empty() || response.tags.len() > crate::skill::MAX_TAGS {
            return Err(ProviderError::InvalidResponse("tag count out of range".into()));
        }
        Ok((response.category, response.tags))
    }

    fn confirm_relation(&self, candidate: &Edge) -> Result<RelationVerdict, ProviderError> {
        let client = self.relation_client.as_ref().ok_or_else(|| {
            ProviderError::Unavailable("no relation endpoint configured".into())
        })?;
        client.post(candidate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Provenance;

    fn edge(confidence: f64) -> Edge {
        Edge {
            src: "a".into(),
            dst: "b".into(),
            rel: RelationType::SimilarTo,
            confidence,
            provenance: Provenance::EmbeddingSimilarity,
        }
    }

    #[test]
    fn rule_judge_relation_threshold() {
        let judge = RuleJudge::default();
        assert_eq!(judge.confirm_relation(&edge(0.95)).unwrap(), RelationVerdict::Accept);
        assert_eq!(judge.confirm_relation(&edge(0.9)).unwrap(), RelationVerdict::Accept);
        assert_eq!(judge.confirm_relation(&edge(0.6)).unwrap(), RelationVerdict::Reject);
    }

    #[test]
    fn verdict_wire_format() {
        assert_eq!(
            serde_json::to_string(&RelationVerdict::Retype(RelationType::ComposeWith)).unwrap(),
            r#"{"verdict":"retype","rel":"compose_with"}"#
        );
        let v: RelationVerdict = serde_json::from_str(r#"{"verdict":"accept"}"#).unwrap();
        assert_eq!(v, RelationVerdict::Accept);
    }

    #[test]
    fn unreachable_remote_falls_back() {
        let mut endpoint = HttpEndpoint::new("http://127.0.0.1:9/grade");
        endpoint.retries = 1;
        endpoint.backoff = std::time::Duration::from_millis(1);
        let counter = CallCounter::new();
        let remote = RemoteJudge::new("down", endpoint, counter.clone());
        let pkg = SkillPackage::new(
            crate::skill::SkillDocument::new(
                crate::skill::SkillMetadata::new("x", "y", Category::Other),
                "1. Read.\n",
            ),
            vec![],
        )
        .unwrap();
        assert!(matches!(remote.grade(&pkg, None), Err(ProviderError::Unavailable(_))));
        assert_eq!(counter.get(), 2);
        let judge = WithFallback::new(remote);
        let sheet = judge.grade(&pkg, None).unwrap();
        assert_eq!(sheet.judge_identity, RUBRIC_VERSION);
    }
}
