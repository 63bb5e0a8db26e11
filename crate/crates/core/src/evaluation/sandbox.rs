//! Child-process sandbox for bundled entry scripts.
//!
//! The package is materialized into a throwaway directory, the entry script
//! runs in its own process group with a cleared environment, stdin closed
//! and (by default) a fresh network namespace. Wall-clock and resident
//! memory limits are enforced by a supervising poll loop that kills the
//! whole process group.

use std::io::Read;
use std::os::unix::fs::PermissionsExt;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skill::{write_package_dir, SkillError, SkillPackage};

pub const MAX_CAPTURED_OUTPUT: usize = 64 * 1024;
const POLL_INTERVAL: Duration = Duration::from_millis(5);
const SANDBOX_PATH: &str = "/usr/local/bin:/usr/bin:/bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxLimits {
    pub wall_ms: u64,
    pub mem_bytes: u64,
}

impl Default for SandboxLimits {
    fn default() -> Self {
        SandboxLimits {
            wall_ms: 10_000,
            mem_bytes: 512 * 1024 * 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SandboxOutcome {
    Succeeded,
    NonzeroExit,
    Timeout,
    MemoryExceeded,
    NoEntryPoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxResult {
    pub outcome: SandboxOutcome,
    pub exit_code: Option<i32>,
    pub wall_time_ms: u64,
    pub peak_memory_bytes: u64,
    pub captured_output: String,
}

impl SandboxResult {
    pub fn no_entry_point() -> Self {
        SandboxResult {
            outcome: SandboxOutcome::NoEntryPoint,
            exit_code: None,
            wall_time_ms: 0,
            peak_memory_bytes: 0,
            captured_output: String::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("sandbox unavailable: {0}")]
    Unavailable(String),
    #[error("sandbox limits must be positive")]
    InvalidLimits,
    #[error(transparent)]
    Package(#[from] SkillError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct SandboxConfig {
    pub limits: SandboxLimits,
    /// Run the child in a new network namespace. When the platform refuses,
    /// runs fail with [`SandboxError::Unavailable`].
    pub isolate_network: bool,
    /// Upper bound on concurrently running sandboxes.
    pub max_concurrent: usize,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            limits: SandboxLimits::default(),
            isolate_network: true,
            max_concurrent: 4,
        }
    }
}

/// Sandbox runner with a global concurrency cap shared by its clones.
#[derive(Debug, Clone)]
pub struct Sandbox {
    config: SandboxConfig,
    slots: Arc<(Mutex<usize>, Condvar)>,
}

impl Sandbox {
    pub fn new(config: SandboxConfig) -> Self {
        let slots = Arc::new((Mutex::new(config.max_concurrent.max(1)), Condvar::new()));
        Sandbox { config, slots }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    pub fn limits(&self) -> SandboxLimits {
        self.config.limits
    }

    pub fn with_limits(&self, limits: SandboxLimits) -> Sandbox {
        Sandbox {
            config: SandboxConfig {
                limits,
                ..self.config.clone()
            },
            slots: Arc::clone(&self.slots),
        }
    }

    /// Runs the package's declared entry script.
    pub fn run(&self, pkg: &SkillPackage, args: &[String]) -> Result<SandboxResult, SandboxError> {
        let limits = self.config.limits;
        if limits.wall_ms == 0 || limits.mem_bytes == 0 {
            return Err(SandboxError::InvalidLimits);
        }
        let Some(entry) = pkg.document.entry() else {
            return Ok(SandboxResult::no_entry_point());
        };
        if pkg.resource(entry).is_none() {
            return Ok(SandboxResult::no_entry_point());
        }
        if self.config.isolate_network && !network_isolation_available() {
            return Err(SandboxError::Unavailable(
                "cannot create a network namespace on this host".into(),
            ));
        }

        let _slot = SlotGuard::acquire(&self.slots);
        let workdir = tempfile::Builder::new().prefix("skill-sandbox-").tempdir()?;
        write_package_dir(pkg, workdir.path())?;
        let script = workdir.path().join(entry);
        let mut command = command_for(&script)?;
        command.args(args);
        supervise(command, workdir.path(), limits, self.config.isolate_network)
    }
}

impl Default for Sandbox {
    fn default() -> Self {
        Sandbox::new(SandboxConfig::default())
    }
}

/// Runs `pkg`'s entry script with default isolation and the given limits.
pub fn run_sandbox(pkg: &SkillPackage, limits: SandboxLimits) -> Result<SandboxResult, SandboxError> {
    Sandbox::new(SandboxConfig {
        limits,
        ..SandboxConfig::default()
    })
    .run(pkg, &[])
}

struct SlotGuard<'a>(&'a (Mutex<usize>, Condvar));

impl<'a> SlotGuard<'a> {
    fn acquire(slots: &'a (Mutex<usize>, Condvar)) -> Self {
        let (lock, cvar) = slots;
        let mut free = lock.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = cvar.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(slots)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let (lock, cvar) = self.0;
        *lock.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        cvar.notify_one();
    }
}

fn command_for(script: &Path) -> Result<Command, SandboxError> {
    let interpreter = match script.extension().and_then(|e| e.to_str()) {
        Some("sh") => Some("sh"),
        Some("bash") => Some("bash"),
        Some("py") => Some("python3"),
        Some("js") | Some("mjs") => Some("node"),
        Some("rb") => Some("ruby"),
        Some("pl") => Some("perl"),
        _ => None,
    };
    Ok(match interpreter {
        Some(bin) => {
            let mut cmd = Command::new(bin);
            cmd.arg(script);
            cmd
        }
        None => {
            let mut perms = std::fs::metadata(script)?.permissions();
            perms.set_mode(0o755);
            std::fs::set_permissions(script, perms)?;
            Command::new(script)
        }
    })
}

fn enter_network_namespace() -> std::io::Result<()> {
    // Root can unshare the network namespace directly; otherwise a user
    // namespace is needed first.
    unsafe {
        if libc::unshare(libc::CLONE_NEWNET) == 0 {
            return Ok(());
        }
        if libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) == 0 {
            return Ok(());
        }
    }
    Err(std::io::Error::last_os_error())
}

/// Whether this host lets the sandbox create a private network namespace.
pub fn network_isolation_available() -> bool {
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| {
        let mut probe = Command::new("/bin/sh");
        probe
            .args(["-c", "exit 0"])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null());
        unsafe {
            probe.pre_exec(enter_network_namespace);
        }
        probe.status().is_ok_and(|s| s.success())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kill {
    Wall,
    Memory,
}

fn supervise(
    mut command: Command,
    workdir: &Path,
    limits: SandboxLimits,
    isolate_network: bool,
) -> Result<SandboxResult, SandboxError> {
    let (reader, writer) = std::io::pipe()?;
    command
        .current_dir(workdir)
        .env_clear()
        .env("PATH", SANDBOX_PATH)
        .env("HOME", workdir)
        .env("TMPDIR", workdir)
        .env("LANG", "C.UTF-8")
        .stdin(Stdio::null())
        .stdout(writer.try_clone()?)
        .stderr(writer);
    unsafe {
        command.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            let no_core = libc::rlimit {
                rlim_cur: 0,
                rlim_max: 0,
            };
            libc::setrlimit(libc::RLIMIT_CORE, &no_core);
            if isolate_network {
                enter_network_namespace()?;
            }
            Ok(())
        });
    }

    let started = Instant::now();
    let child = command.spawn()?;
    // Release the parent's copies of the pipe's write end.
    drop(command);
    let pid = child.id() as libc::pid_t;

    let captured = Arc::new(Mutex::new(Vec::new()));
    let (done_tx, done_rx) = mpsc::channel();
    {
        let captured = Arc::clone(&captured);
        let mut reader = reader;
        thread::spawn(move || {
            let mut buf = [0u8; 8192];
            loop {
                match reader.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => {
                        let mut out = captured.lock().unwrap_or_else(|e| e.into_inner());
                        let room = MAX_CAPTURED_OUTPUT.saturating_sub(out.len());
                        out.extend_from_slice(&buf[..n.min(room)]);
                    }
                }
            }
            let _ = done_tx.send(());
        });
    }

    let wall_limit = Duration::from_millis(limits.wall_ms);
    let mut killed = None;
    let mut peak_rss = 0u64;
    let (status, rusage) = loop {
        let mut status = 0;
        let mut rusage: libc::rusage = unsafe { std::mem::zeroed() };
        let reaped = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut rusage) };
        if reaped == pid {
            break (status, rusage);
        }
        if reaped < 0 {
            let err = std::io::Error::last_os_error();
            if err.kind() != std::io::ErrorKind::Interrupted {
                return Err(err.into());
            }
        }
        if killed.is_none() {
            peak_rss = peak_rss.max(tree_rss_bytes(pid as u32));
            if peak_rss >= limits.mem_bytes {
                killed = Some(Kill::Memory);
            } else if started.elapsed() >= wall_limit {
                killed = Some(Kill::Wall);
            }
            if killed.is_some() {
                kill_group(pid);
            }
        }
        thread::sleep(POLL_INTERVAL);
    };
    let wall_time_ms = started.elapsed().as_millis() as u64;
    // Stragglers that inherited the group still hold the pipe open.
    kill_group(pid);
    let _ = done_rx.recv_timeout(Duration::from_millis(500));

    // ru_maxrss is in kilobytes on Linux.
    let reported_peak = (rusage.ru_maxrss.max(0) as u64) * 1024;
    let peak_memory_bytes = peak_rss.max(reported_peak);

    let exit_code = if libc::WIFEXITED(status) {
        Some(libc::WEXITSTATUS(status))
    } else {
        None
    };
    let outcome = match killed {
        Some(Kill::Wall) => SandboxOutcome::Timeout,
        Some(Kill::Memory) => SandboxOutcome::MemoryExceeded,
        None if peak_memory_bytes >= limits.mem_bytes => SandboxOutcome::MemoryExceeded,
        None if exit_code == Some(0) => SandboxOutcome::Succeeded,
        None => SandboxOutcome::NonzeroExit,
    };

    let bytes = captured.lock().unwrap_or_else(|e| e.into_inner()).clone();
    Ok(SandboxResult {
        outcome,
        exit_code,
        wall_time_ms,
        peak_memory_bytes,
        captured_output: truncate_output(&bytes),
    })
}

fn kill_group(pgid: libc::pid_t) {
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

fn truncate_output(bytes: &[u8]) -> String {
    let mut text = String::from_utf8_lossy(bytes).into_owned();
    if text.len() > MAX_CAPTURED_OUTPUT {
        let mut cut = MAX_CAPTURED_OUTPUT;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        text.truncate(cut);
    }
    text
}

/// Resident set size summed over `pid` and its descendants.
fn tree_rss_bytes(pid: u32) -> u64 {
    let mut total = 0;
    let mut stack = vec![pid];
    let mut visited = 0;
    while let Some(p) = stack.pop() {
        visited += 1;
        if visited > 4096 {
            break;
        }
        total += rss_bytes(p);
        let Ok(tasks) = std::fs::read_dir(format!("/proc/{p}/task")) else {
            continue;
        };
        for task in tasks.flatten() {
            if let Ok(children) = std::fs::read_to_string(task.path().join("children")) {
                stack.extend(children.split_whitespace().filter_map(|c| c.parse::<u32>().ok()));
            }
        }
    }
    total
}

fn rss_bytes(pid: u32) -> u64 {
    let Ok(status) = std::fs::read_to_string(format!("/proc/{pid}/status")) else {
        return 0;
    };
    status
        .lines()
        .find_map(|line| line.strip_prefix("VmRSS:"))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|kb| kb.parse::<u64>().ok())
        .map_or(0, |kb| kb * 1024)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skill::{Category, Resource, SkillDocument, SkillMetadata};

    fn script_package(file: &str, body: &str) -> SkillPackage {
        let mut doc = SkillDocument::new(
            SkillMetadata::new("sandbox-probe", "Probe the sandbox", Category::Testing),
            format!("1. Run `{file}`.\n"),
        );
        doc.set_extra("entry", file);
        SkillPackage::new(doc, vec![Resource::new(file, body)]).unwrap()
    }

    /// Runs the package, or returns `None` (and says so) on hosts where
    /// network namespaces cannot be created.
    fn run_or_skip(pkg: &SkillPackage, limits: SandboxLimits) -> Option<SandboxResult> {
        match run_sandbox(pkg, limits) {
            Err(SandboxError::Unavailable(reason)) => {
                eprintln!("skipping: sandbox unavailable: {reason}");
                None
            }
            other => Some(other.unwrap()),
        }
    }

    fn limits(wall_ms: u64) -> SandboxLimits {
        SandboxLimits {
            wall_ms,
            mem_bytes: 256 * 1024 * 1024,
        }
    }

    #[test]
    fn exit_zero_succeeds() {
        let pkg = script_package("run.sh", "echo ok\n");
        let Some(result) = run_or_skip(&pkg, limits(5_000)) else {
            return;
        };
        assert_eq!(result.outcome, SandboxOutcome::Succeeded);
        assert_eq!(result.exit_code, Some(0));
        assert_eq!(result.captured_output, "ok\n");
    }

    #[test]
    fn nonzero_exit() {
        let pkg = script_package("run.sh", "echo bad >&2\nexit 3\n");
        let Some(result) = run_or_skip(&pkg, limits(5_000)) else {
            return;
        };
        assert_eq!(result.outcome, SandboxOutcome::NonzeroExit);
        assert_eq!(result.exit_code, Some(3));
        assert!(result.captured_output.contains("bad"));
    }

    #[test]
    fn sleeping_past_the_limit_times_out() {
        let pkg = script_package("run.sh", "sleep 30\n");
        let started = Instant::now();
        let Some(result) = run_or_skip(&pkg, limits(300)) else {
            return;
        };
        assert_eq!(result.outcome, SandboxOutcome::Timeout);
        assert!(result.wall_time_ms >= 300);
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn memory_hog_is_stopped() {
        let pkg = script_package(
            "hog.py",
            "import time\nblocks = []\nwhile True:\n    blocks.append(bytearray(8 * 1024 * 1024))\n    time.sleep(0.001)\n",
        );
        let Some(result) = run_or_skip(&pkg, SandboxLimits {
                wall_ms: 20_000,
                mem_bytes: 64 * 1024 * 1024,
            }) else {
            return;
        };
        assert_eq!(result.outcome, SandboxOutcome::MemoryExceeded);
    }

    #[test]
    fn text_only_package_has_no_entry_point() {
        let pkg = SkillPackage::new(
            SkillDocument::new(
                SkillMetadata::new("text-only", "Only text", Category::Other),
                "1. Read.\n",
            ),
            vec![],
        )
        .unwrap();
        let Some(result) = run_or_skip(&pkg, limits(1_000)) else {
            return;
        };
        assert_eq!(result.outcome, SandboxOutcome::NoEntryPoint);
    }

    #[test]
    fn network_is_unreachable() {
        let pkg = script_package(
            "net.py",
            "import socket\ns = socket.socket()\ns.settimeout(1)\ntry:\n    s.connect(('1.1.1.1', 80))\n    print('connected')\nexcept OSError as e:\n    print('blocked', e)\n",
        );
        let Some(result) = run_or_skip(&pkg, limits(5_000)) else {
            return;
        };
        assert!(result.captured_output.starts_with("blocked"), "{}", result.captured_output);
    }

    #[test]
    fn args_and_clean_environment() {
        let pkg = script_package("run.sh", "echo \"$@\"\necho \"secret=${SECRET_TOKEN:-unset}\"\npwd\n");
        std::env::set_var("SECRET_TOKEN", "leak");
        let result = match Sandbox::new(SandboxConfig {
            limits: limits(5_000),
            ..SandboxConfig::default()
        })
        .run(&pkg, &["alpha".into(), "beta".into()])
        {
            Err(SandboxError::Unavailable(reason)) => {
                eprintln!("skipping: sandbox unavailable: {reason}");
                return;
            }
            other => other.unwrap(),
        };
        assert!(result.captured_output.starts_with("alpha beta\n"));
        assert!(result.captured_output.contains("secret=unset"));
    }

    #[test]
    fn output_is_truncated() {
        let pkg = script_package("run.sh", "head -c 200000 /dev/zero | tr '\\0' 'a'\n");
        let Some(result) = run_or_skip(&pkg, limits(5_000)) else {
            return;
        };
        assert_eq!(result.outcome, SandboxOutcome::Succeeded);
        assert_eq!(result.captured_output.len(), MAX_CAPTURED_OUTPUT);
    }

    #[test]
    fn zero_limits_are_rejected() {
        let pkg = script_package("run.sh", "true\n");
        assert!(matches!(
            run_sandbox(&pkg, SandboxLimits { wall_ms: 0, mem_bytes: 1 }),
            Err(SandboxError::InvalidLimits)
        ));
    }
}
