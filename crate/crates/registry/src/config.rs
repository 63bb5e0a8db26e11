//! Service configuration.

use std::net::SocketAddr;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use skillnet_core::evaluation::sandbox::{Sandbox, SandboxConfig, SandboxLimits};
use skillnet_core::provider::ProviderSettings;
use skillnet_core::search::MAX_TOP_K;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxSettings {
    /// Run entry scripts during evaluation. When off, Executability is
    /// graded from the package text alone.
    pub enabled: bool,
    pub wall_ms: u64,
    pub mem_bytes: u64,
    pub max_concurrent: usize,
}

impl Default for SandboxSettings {
    fn default() -> Self {
        let limits = SandboxLimits::default();
        SandboxSettings {
            enabled: true,
            wall_ms: limits.wall_ms,
            mem_bytes: limits.mem_bytes,
            max_concurrent: 4,
        }
    }
}

impl SandboxSettings {
    pub fn build(&self) -> Option<Sandbox> {
        self.enabled.then(|| {
            Sandbox::new(SandboxConfig {
                limits: SandboxLimits {
                    wall_ms: self.wall_ms,
                    mem_bytes: self.mem_bytes,
                },
                isolate_network: true,
                max_concurrent: self.max_concurrent,
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub root: PathBuf,
    pub bind: SocketAddr,
    /// Largest accepted `top_k`; never above the index's own bound.
    pub max_top_k: usize,
    pub max_concurrent_contributions: usize,
    pub max_upload_bytes: usize,
    /// When set, every request must carry this token as
    /// `Authorization: Bearer <token>` or `X-Skillnet-Token: <token>`.
    pub auth_token: Option<String>,
    pub curation_workers: usize,
    pub sandbox: SandboxSettings,
    pub providers: ProviderSettings,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            root: PathBuf::from("skillnet-store"),
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            max_top_k: MAX_TOP_K,
            max_concurrent_contributions: 2,
            max_upload_bytes: 16 * 1024 * 1024,
            auth_token: None,
            curation_workers: 4,
            sandbox: SandboxSettings::default(),
            providers: ProviderSettings::default(),
        }
    }
}

impl ServiceConfig {
    pub fn effective_max_top_k(&self) -> usize {
        self.max_top_k.clamp(1, MAX_TOP_K)
    }
}
