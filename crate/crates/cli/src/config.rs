//! Layered configuration: flags over `SKILLNET_*` environment variables
//! over the TOML config file over defaults.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;
use skillnet_core::provider::ProviderSettings;
use skillnet_registry::{SandboxSettings, ServiceConfig};

use crate::error::CliError;

pub const DEFAULT_STORE: &str = "skillnet-store";

pub const ENV_CONFIG: &str = "SKILLNET_CONFIG";
pub const ENV_REGISTRY: &str = "SKILLNET_REGISTRY";
pub const ENV_STORE: &str = "SKILLNET_STORE";
pub const ENV_OUTPUT: &str = "SKILLNET_OUTPUT";
pub const ENV_TOKEN: &str = "SKILLNET_TOKEN";
pub const ENV_JUDGE_URL: &str = "SKILLNET_JUDGE_URL";
pub const ENV_EMBEDDING_URL: &str = "SKILLNET_EMBEDDING_URL";
pub const ENV_GENERATOR_URL: &str = "SKILLNET_GENERATOR_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Human,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human" => Ok(OutputFormat::Human),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::usage(format!("unknown output format `{other}`; expected human or json"))),
        }
    }
}

/// Where commands read and write skills.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Remote(String),
    Local(PathBuf),
}

/// Contents of the optional TOML file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub registry_url: Option<String>,
    pub store_path: Option<PathBuf>,
    pub output: Option<OutputFormat>,
    pub auth_token: Option<String>,
    pub bind: Option<SocketAddr>,
    pub providers: Option<ProviderSettings>,
    pub sandbox: Option<SandboxSettings>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config file {}: {e}", path.display())))
    }
}

/// Global values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct FlagValues {
    pub registry: Option<String>,
    pub store: Option<PathBuf>,
    pub output: Option<OutputFormat>,
    pub config: Option<PathBuf>,
    pub token: Option<String>,
    pub no_sandbox: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub target: Target,
    pub output: OutputFormat,
    pub auth_token: Option<String>,
    pub bind: SocketAddr,
    pub providers: ProviderSettings,
    pub sandbox: SandboxSettings,
}

/// Picks the store target from one layer; a layer naming both is a usage
/// error, a layer naming neither defers to the next.
fn layer_target(
    source: &str,
    registry: Option<String>,
    store: Option<PathBuf>,
) -> Result<Option<Target>, CliError> {
    match (registry, store) {
        (Some(_), Some(_)) => Err(CliError::usage(format!(
            "{source} sets both a registry URL and a store path; use exactly one"
        ))),
        (Some(url), None) => Ok(Some(Target::Remote(url.trim_end_matches('/').to_string()))),
        (None, Some(path)) => Ok(Some(Target::Local(path))),
        (None, None) => Ok(None),
    }
}

impl CliConfig {
    /// Resolves the configuration. `env` looks up one variable; empty
    /// values count as unset.
    pub fn resolve(flags: FlagValues, env: impl Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let env = |key: &str| env(key).filter(|v| !v.trim().is_empty());
        let file = match flags.config.clone().or_else(|| env(ENV_CONFIG).map(PathBuf::from)) {
            Some(path) => FileConfig::load(&path)?,
            None => FileConfig::default(),
        };

        let target = match layer_target("the command line", flags.registry, flags.store)? {
            Some(t) => t,
            None => match layer_target("the environment", env(ENV_REGISTRY), env(ENV_STORE).map(PathBuf::from))? {
                Some(t) => t,
                None => layer_target("the config file", file.registry_url, file.store_path)?
                    .unwrap_or_else(|| Target::Local(PathBuf::from(DEFAULT_STORE))),
            },
        };
        if let Target::Remote(url) = &target {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(CliError::usage(format!("registry URL `{url}` must start with http:// or https://")));
            }
        }

        let output = match flags.output {
            Some(o) => o,
            None => match env(ENV_OUTPUT) {
                Some(raw) => raw.parse()?,
                None => file.output.unwrap_or_default(),
            },
        };

        let mut providers = file.providers.unwrap_or_default();
        for (key, slot) in [
            (ENV_JUDGE_URL, &mut providers.judge_url),
            (ENV_EMBEDDING_URL, &mut providers.embedding_url),
            (ENV_GENERATOR_URL, &mut providers.generator_url),
        ] {
            if let Some(value) = env(key) {
                *slot = Some(value);
            }
        }

        let mut sandbox = file.sandbox.unwrap_or_default();
        if flags.no_sandbox {
            sandbox.enabled = false;
        }

        Ok(CliConfig {
            target,
            output,
            auth_token: flags.token.or_else(|| env(ENV_TOKEN)).or(file.auth_token),
            bind: file.bind.unwrap_or_else(|| ServiceConfig::default().bind),
            providers,
            sandbox,
        })
    }

    /// Service settings for a local store at `root`.
    pub fn service(&self, root: &Path) -> ServiceConfig {
        ServiceConfig {
            root: root.to_path_buf(),
            bind: self.bind,
            auth_token: self.auth_token.clone(),
            sandbox: self.sandbox.clone(),
            providers: self.providers.clone(),
            ..ServiceConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    fn config_file(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("skillnet.toml");
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn defaults_to_a_local_store() {
        let cfg = CliConfig::resolve(FlagValues::default(), env(&[])).unwrap();
        assert_eq!(cfg.target, Target::Local(PathBuf::from(DEFAULT_STORE)));
        assert_eq!(cfg.output, OutputFormat::Human);
        assert!(cfg.sandbox.enabled);
        assert_eq!(cfg.auth_token, None);
    }

    #[test]
    fn flags_beat_env_beat_file() {
        let (_dir, path) = config_file(
            "registry_url = \"http://file:1\"\noutput = \"human\"\nauth_token = \"file\"\n\
             [providers]\njudge_url = \"http://judge-file\"\n",
        );
        let file_only = FlagValues { config: Some(path.clone()), ..FlagValues::default() };
        let cfg = CliConfig::resolve(file_only.clone(), env(&[])).unwrap();
        assert_eq!(cfg.target, Target::Remote("http://file:1".into()));
        assert_eq!(cfg.auth_token.as_deref(), Some("file"));
        assert_eq!(cfg.providers.judge_url.as_deref(), Some("http://judge-file"));

        let vars = env(&[
            (ENV_STORE, "/env/store"),
            (ENV_OUTPUT, "json"),
            (ENV_TOKEN, "env"),
            (ENV_JUDGE_URL, "http://judge-env"),
        ]);
        let cfg = CliConfig::resolve(file_only.clone(), &vars).unwrap();
        assert_eq!(cfg.target, Target::Local(PathBuf::from("/env/store")));
        assert_eq!(cfg.output, OutputFormat::Json);
        assert_eq!(cfg.auth_token.as_deref(), Some("env"));
        assert_eq!(cfg.providers.judge_url.as_deref(), Some("http://judge-env"));

        let flags = FlagValues {
            registry: Some("http://flag:2/".into()),
            output: Some(OutputFormat::Human),
            token: Some("flag".into()),
            ..file_only
        };
        let cfg = CliConfig::resolve(flags, &vars).unwrap();
        assert_eq!(cfg.target, Target::Remote("http://flag:2".into()));
        assert_eq!(cfg.output, OutputFormat::Human);
        assert_eq!(cfg.auth_token.as_deref(), Some("flag"));
    }

    #[test]
    fn config_file_from_env() {
        let (_dir, path) = config_file("store_path = \"/from/file\"\n[sandbox]\nenabled = false\n");
        let cfg = CliConfig::resolve(FlagValues::default(), env(&[(ENV_CONFIG, path.to_str().unwrap())])).unwrap();
        assert_eq!(cfg.target, Target::Local(PathBuf::from("/from/file")));
        assert!(!cfg.sandbox.enabled);
    }

    #[test]
    fn both_targets_in_one_layer_is_a_usage_error() {
        let flags = FlagValues {
            registry: Some("http://x".into()),
            store: Some("s".into()),
            ..FlagValues::default()
        };
        assert_eq!(CliConfig::resolve(flags, env(&[])).unwrap_err().exit_code(), 2);
        let err = CliConfig::resolve(FlagValues::default(), env(&[(ENV_REGISTRY, "http://x"), (ENV_STORE, "s")])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        // One per layer is fine: the higher layer wins.
        let flags = FlagValues { store: Some("s".into()), ..FlagValues::default() };
        let cfg = CliConfig::resolve(flags, env(&[(ENV_REGISTRY, "http://x")])).unwrap();
        assert_eq!(cfg.target, Target::Local(PathBuf::from("s")));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let cases = [
            CliConfig::resolve(FlagValues::default(), env(&[(ENV_OUTPUT, "xml")])),
            CliConfig::resolve(FlagValues::default(), env(&[(ENV_REGISTRY, "ftp://x")])),
            CliConfig::resolve(
                FlagValues { config: Some("/nonexistent/skillnet.toml".into()), ..FlagValues::default() },
                env(&[]),
            ),
        ];
        for case in cases {
            assert_eq!(case.unwrap_err().exit_code(), 2);
        }
        let (_dir, path) = config_file("unknown_key = 1\n");
        let err = CliConfig::resolve(FlagValues { config: Some(path), ..FlagValues::default() }, env(&[])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn empty_env_values_are_ignored() {
        let cfg = CliConfig::resolve(FlagValues::default(), env(&[(ENV_REGISTRY, ""), (ENV_OUTPUT, " ")])).unwrap();
        assert_eq!(cfg.target, Target::Local(PathBuf::from(DEFAULT_STORE)));
        assert_eq!(cfg.output, OutputFormat::Human);
    }
}
