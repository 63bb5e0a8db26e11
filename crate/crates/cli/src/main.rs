//! `skillnet`: search, download, create, evaluate, analyze and contribute
//! skills against a local store or a remote registry, or serve a store.

mod backend;
mod commands;
mod config;
mod error;
mod render;

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use skillnet_core::search::{SearchMode, DEFAULT_TOP_K};
use tracing_subscriber::EnvFilter;

use commands::{CreateSource, Report, SearchRequest};
use config::{CliConfig, FlagValues, OutputFormat, ENV_OUTPUT};
use error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "skillnet", version, about = "Create, curate, search and serve agent skills")]
struct Cli {
    /// Remote registry base URL (excludes --store).
    #[arg(long, global = true, value_name = "URL")]
    registry: Option<String>,
    /// Local store directory (excludes --registry).
    #[arg(long, global = true, value_name = "PATH")]
    store: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    output: Option<OutputFormat>,
    /// TOML config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Shared registry token: sent by clients, required by `serve`.
    #[arg(long, global = true)]
    token: Option<String>,
    /// Grade Executability from the package text instead of running scripts.
    #[arg(long, global = true)]
    no_sandbox: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Keyword,
    Vector,
    Hybrid,
}

impl From<ModeArg> for SearchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Keyword => SearchMode::Keyword,
            ModeArg::Vector => SearchMode::Vector,
            ModeArg::Hybrid => SearchMode::Hybrid,
        }
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// A natural-language request.
    #[arg(long, value_name = "TEXT")]
    from_prompt: Option<String>,
    /// A repository directory; each top-level script becomes a skill.
    #[arg(long, value_name = "DIR")]
    from_dir: Option<PathBuf>,
    /// A text or Markdown document.
    #[arg(long, value_name = "FILE")]
    from_doc: Option<PathBuf>,
    /// A JSON array of `{actor, action, observation}` steps.
    #[arg(long, value_name = "FILE")]
    from_trajectory: Option<PathBuf>,
}

impl SourceArgs {
    fn into_source(self) -> CreateSource {
        match self {
            SourceArgs { from_prompt: Some(p), .. } => CreateSource::Prompt(p),
            SourceArgs { from_dir: Some(d), .. } => CreateSource::Dir(d),
            SourceArgs { from_doc: Some(f), .. } => CreateSource::Doc(f),
            SourceArgs { from_trajectory: Some(f), .. } => CreateSource::Trajectory(f),
            SourceArgs { .. } => unreachable!("clap requires exactly one source"),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank skills for a query.
    Search {
        query: String,
        #[arg(long, value_enum, default_value = "hybrid")]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long)]
        category: Option<String>,
        /// Required tag; repeat for several.
        #[arg(long = "tag", value_name = "TAG")]
        tags: Vec<String>,
    },
    /// Fetch a skill package, verify its fingerprint and extract it.
    Download {
        skill_id: String,
        /// Target directory [default: ./<skill_id>].
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Generate skill packages from a source.
    Create {
        #[command(flatten)]
        source: SourceArgs,
        /// Directory receiving one package directory per skill.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Grade a package directory on the five quality dimensions.
    Evaluate { dir: PathBuf },
    /// Rebuild relations in a local store and summarize the graph.
    Analyze {
        /// JSON array of traces, each an array of `{skill_id, outcome}`.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Category and grade distributions.
    Stats,
    /// Submit a package directory for curation and admission.
    Contribute { dir: PathBuf },
    /// Serve a local store over HTTP.
    Serve {
        #[arg(long)]
        bind: Option<SocketAddr>,
    },
}

/// Whether the raw arguments or environment ask for JSON, for reporting
/// errors found before the arguments parse.
fn wants_json(args: &[OsString]) -> bool {
    let args: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let flagged = args.windows(2).rev().find(|w| w[0] == "--output").map(|w| w[1] == "json");
    let inline = args.iter().rev().find_map(|a| a.strip_prefix("--output=").map(|v| v == "json"));
    flagged
        .or(inline)
        .unwrap_or_else(|| std::env::var(ENV_OUTPUT).is_ok_and(|v| v.trim() == "json"))
}

fn print_error(error: &CliError, output: OutputFormat) {
    match output {
        OutputFormat::Json => println!("{}", error.to_json()),
        OutputFormat::Human => eprintln!("error: {error}"),
    }
}

fn init_logging(default: &str) {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn run(args: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            if wants_json(&args) {
                let rendered = e.to_string();
                let first = rendered.lines().next().unwrap_or_default().trim_start_matches("error: ");
                print_error(&CliError::usage(first), OutputFormat::Json);
            } else {
                let _ = e.print();
            }
            return EXIT_USAGE;
        }
    };
    init_logging(if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" });

    let flags = FlagValues {
        registry: cli.registry,
        store: cli.store,
        output: cli.output,
        config: cli.config,
        token: cli.token,
        no_sandbox: cli.no_sandbox,
    };
    let fallback_output = flags.output.unwrap_or(if wants_json(&args) { OutputFormat::Json } else { OutputFormat::Human });
    let config = match CliConfig::resolve(flags, |k| std::env::var(k).ok()) {
        Ok(config) => config,
        Err(e) => {
            print_error(&e, fallback_output);
            return e.exit_code();
        }
    };
    let output = config.output;

    let result: Result<Option<Report>, CliError> = match cli.command {
        Command::Search { query, mode, top_k, category, tags } => commands::search(
            &config,
            SearchRequest { query, mode: mode.into(), top_k, category, tags },
        )
        .map(Some),
        Command::Download { skill_id, dest } => commands::download(&config, &skill_id, dest).map(Some),
        Command::Create { source, out } => commands::create(&config, source.into_source(), &out).map(Some),
        Command::Evaluate { dir } => commands::evaluate_dir(&config, &dir).map(Some),
        Command::Analyze { traces } => commands::analyze(&config, traces.as_deref()).map(Some),
        Command::Stats => commands::stats(&config).map(Some),
        Command::Contribute { dir } => commands::contribute(&config, &dir).map(Some),
        Command::Serve { bind } => commands::serve(&config, bind, |addr| match output {
            OutputFormat::Json => println!("{}", json!({ "listening": format!("http://{addr}") })),
            OutputFormat::Human => println!("listening on http://{addr}"),
        })
        .map(|()| None),
    };
    match result {
        Ok(Some(report)) => {
            match output {
                OutputFormat::Json => println!("{}", report.json),
                OutputFormat::Human => print!("{}", report.human),
            }
            EXIT_OK
        }
        Ok(None) => EXIT_OK,
        Err(e) => {
            print_error(&e, output);
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}
