//! The same operations against a local store or a remote registry.

use std::path::Path;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use skillnet_core::evaluation::Grades;
use skillnet_core::repository::{Contribution, SearchResult};
use skillnet_core::search::{SearchFilter, SearchMode};
use skillnet_core::skill::{write_archive, SkillPackage};
use skillnet_core::store::{ManifestEntry, StoreStats};
use skillnet_registry::{ApiError, AppState, TOKEN_HEADER};

use crate::config::{CliConfig, Target};
use crate::error::CliError;

const REMOTE_TIMEOUT: Duration = Duration::from_secs(60);
const MAX_RESPONSE_BYTES: u64 = 256 * 1024 * 1024;

/// Result of a contribution that was processed, including refusals.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Admitted { skill_id: String, grades: Grades },
    Duplicate { existing_id: String },
    Rejected { message: String, report: Value },
}

pub enum Backend {
    Local(AppState),
    Remote(RemoteClient),
}

impl Backend {
    pub fn connect(config: &CliConfig) -> Result<Self, CliError> {
        match &config.target {
            Target::Remote(url) => Ok(Backend::Remote(RemoteClient::new(url, config.auth_token.clone()))),
            Target::Local(root) => Ok(Backend::Local(open_local(config, root)?)),
        }
    }

    pub fn search(
        &self,
        query: &str,
        mode: SearchMode,
        top_k: usize,
        filter: &SearchFilter,
    ) -> Result<Vec<SearchResult>, CliError> {
        match self {
            Backend::Local(state) => Ok(state.repo.search(query, mode, top_k, filter)?),
            Backend::Remote(client) => {
                #[derive(Deserialize)]
                struct Response {
                    results: Vec<SearchResult>,
                }
                let mut body = json!({ "query": query, "mode": mode, "top_k": top_k });
                if let Some(category) = filter.category {
                    body["category"] = json!(category);
                }
                if !filter.tags.is_empty() {
                    body["tags"] = json!(filter.tags);
                }
                let response: Response = client.json(client.post("/v1/search", "application/json", &serde_json::to_vec(&body).unwrap())?)?;
                Ok(response.results)
            }
        }
    }

    pub fn metadata(&self, skill_id: &str) -> Result<ManifestEntry, CliError> {
        match self {
            Backend::Local(state) => Ok(state.repo.metadata(skill_id)?),
            Backend::Remote(client) => client.json(client.get(&format!("/v1/skills/{skill_id}"))?),
        }
    }

    pub fn archive(&self, skill_id: &str) -> Result<Vec<u8>, CliError> {
        match self {
            Backend::Local(state) => Ok(state.repo.archive(skill_id)?),
            Backend::Remote(client) => client.get(&format!("/v1/skills/{skill_id}/archive")),
        }
    }

    pub fn stats(&self) -> Result<StoreStats, CliError> {
        match self {
            Backend::Local(state) => Ok(state.repo.stats()),
            Backend::Remote(client) => client.json(client.get("/v1/stats")?),
        }
    }

    pub fn contribute(&self, pkg: SkillPackage) -> Result<Outcome, CliError> {
        match self {
            Backend::Local(state) => Ok(match state.repo.contribute(pkg)? {
                Contribution::Admitted { skill_id, grades } => Outcome::Admitted { skill_id, grades },
                Contribution::Duplicate { existing_id } => Outcome::Duplicate { existing_id },
                Contribution::Rejected { report } => Outcome::Rejected {
                    message: format!("skill was not admitted: {}", report.reasons().join("; ")),
                    report: serde_json::to_value(&report).expect("report serializes"),
                },
            }),
            Backend::Remote(client) => {
                let archive = write_archive(&pkg)?;
                match client.post("/v1/skills", "application/x-tar", &archive) {
                    Ok(bytes) => {
                        #[derive(Deserialize)]
                        struct Admitted {
                            skill_id: String,
                            grades: Grades,
                        }
                        let a: Admitted = client.json(bytes)?;
                        Ok(Outcome::Admitted { skill_id: a.skill_id, grades: a.grades })
                    }
                    Err(CliError::Operational { code, message, details }) => match (code.as_str(), details) {
                        ("Duplicate", Some(d)) => Ok(Outcome::Duplicate {
                            existing_id: d["existing_id"].as_str().unwrap_or_default().to_string(),
                        }),
                        ("Rejected", Some(d)) => Ok(Outcome::Rejected { message, report: d["report"].clone() }),
                        (_, details) => Err(CliError::Operational { code, message, details }),
                    },
                    Err(e) => Err(e),
                }
            }
        }
    }
}

/// Opens a local store with the configured providers and sandbox.
pub fn open_local(config: &CliConfig, root: &Path) -> Result<AppState, CliError> {
    Ok(AppState::open(config.service(root))?)
}

pub struct RemoteClient {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl RemoteClient {
    pub fn new(base: &str, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(REMOTE_TIMEOUT))
            .build()
            .into();
        RemoteClient {
            base: base.trim_end_matches('/').to_string(),
            token,
            agent,
        }
    }

    fn get(&self, path: &str) -> Result<Vec<u8>, CliError> {
        let mut request = self.agent.get(format!("{}{path}", self.base));
        if let Some(token) = &self.token {
            request = request.header(TOKEN_HEADER, token);
        }
        self.finish(path, request.call())
    }

    fn post(&self, path: &str, content_type: &str, body: &[u8]) -> Result<Vec<u8>, CliError> {
        let mut request = self.agent.post(format!("{}{path}", self.base)).header("content-type", content_type);
        if let Some(token) = &self.token {
            request = request.header(TOKEN_HEADER, token);
        }
        self.finish(path, request.send(body))
    }

    fn finish(
        &self,
        path: &str,
        response: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<Vec<u8>, CliError> {
        let mut response = response
            .map_err(|e| CliError::op("ConnectionFailed", format!("cannot reach registry at {}: {e}", self.base)))?;
        let status = response.status().as_u16();
        let bytes = response
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(|e| CliError::op("ConnectionFailed", format!("reading response for {path}: {e}")))?;
        if (200..300).contains(&status) {
            return Ok(bytes);
        }
        match serde_json::from_slice::<ApiError>(&bytes) {
            Ok(api) => Err(api.into()),
            Err(_) => Err(CliError::op(
                "HttpError",
                format!("{path} answered {status}: {}", String::from_utf8_lossy(&bytes)),
            )),
        }
    }

    fn json<T: DeserializeOwned>(&self, bytes: Vec<u8>) -> Result<T, CliError> {
        serde_json::from_slice(&bytes).map_err(|e| CliError::op("InvalidResponse", format!("unexpected response from registry: {e}")))
    }
}
