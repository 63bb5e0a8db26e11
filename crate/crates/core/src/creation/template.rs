//! Deterministic template generator used when no model-backed generator is
//! configured. Output depends only on the input bytes.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{Draft, DraftResource, FrontmatterValue, GeneratorProvider, RepoFile, SourceInput, TrajectoryStep};
use crate::provider::ProviderError;
use crate::skill::{MAX_DESCRIPTION_CHARS, SKILL_FILE};
use crate::text::{first_sentence, slugify, truncate_chars, IMPERATIVE_VERBS};

pub const MAX_REPOSITORY_PACKAGES: usize = 5;
const MAX_NAME_WORDS: usize = 8;
const MAX_NAME_CHARS: usize = 64;
const MAX_README_CHARS: usize = 4000;

const SCRIPT_EXTENSIONS: &[(&str, &str)] = &[
    ("bash", "bash"),
    ("js", "node"),
    ("pl", "perl"),
    ("py", "python3"),
    ("rb", "ruby"),
    ("sh", "sh"),
];

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateGenerator;

impl GeneratorProvider for TemplateGenerator {
    fn identity(&self) -> String {
        "template/1".into()
    }

    fn generate(&self, source: &SourceInput) -> Result<Vec<Draft>, ProviderError> {
        Ok(match source {
            SourceInput::Prompt(text) => from_prompt(text).into_iter().collect(),
            SourceInput::RepositoryTree(files) => from_repository(files),
            SourceInput::DocumentText { text, filename } => from_document(text, filename).into_iter().collect(),
            SourceInput::TrajectoryLog(steps) => from_trajectory(steps).into_iter().collect(),
        })
    }
}

fn preamble() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^\s*(please\s+)?((can|could|would)\s+you\s+)?((create|make|build|write|generate|design|draft)\s+(me\s+)?((a|an|the)\s+)?(new\s+)?(agent\s+)?skill\s*((that|which)\s+(can\s+|will\s+)?|for\s+|to\s+|:\s*)?|(i\s+want\s+to|i\s+need\s+to|help\s+me|how\s+to)\s+)",
        )
        .expect("preamble regex compiles")
    })
}

/// Turns a leading gerund or third-person verb into its base form when the
/// base form is a known imperative verb.
fn base_verb(word: &str) -> Option<String> {
    let lower = word.to_lowercase();
    let known = |w: &str| IMPERATIVE_VERBS.binary_search(&w).is_ok();
    if known(&lower) {
        return Some(lower);
    }
    let mut candidates = Vec::new();
    if let Some(stem) = lower.strip_suffix("ing") {
        candidates.push(stem.to_string());
        candidates.push(format!("{stem}e"));
        let mut chars = stem.chars().rev();
        if let (Some(a), Some(b)) = (chars.next(), chars.next()) {
            if a == b {
                candidates.push(stem[..stem.len() - 1].to_string());
            }
        }
    }
    if let Some(stem) = lower.strip_suffix("es") {
        candidates.push(stem.to_string());
    }
    if let Some(stem) = lower.strip_suffix('s') {
        candidates.push(stem.to_string());
    }
    candidates.into_iter().find(|c| known(c))
}

/// The first imperative phrase of `text`: the request with any "create a
/// skill for ..." preamble removed, cut at the first clause break, a leading
/// gerund turned into the base verb, and articles dropped. Original casing
/// is kept for the remaining words.
pub fn imperative_phrase(text: &str) -> Vec<String> {
    let sentence = first_sentence(text);
    let rest = preamble().replace(&sentence, "");
    let clause: &str = rest
        .split(['.', ',', ';', ':', '!', '?', '(', '\n'])
        .next()
        .unwrap_or("");
    let mut words: Vec<String> = clause
        .split_whitespace()
        .filter(|w| !matches!(w.to_lowercase().as_str(), "a" | "an" | "the"))
        .map(str::to_string)
        .collect();
    if let Some(first) = words.first_mut() {
        if let Some(base) = base_verb(first) {
            *first = base;
        }
    }
    words.truncate(MAX_NAME_WORDS);
    words
}

pub fn name_from_phrase(words: &[String]) -> String {
    slugify(&words.join(" "), MAX_NAME_CHARS)
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn frontmatter(name: &str, description: &str) -> BTreeMap<String, FrontmatterValue> {
    let mut fm = BTreeMap::new();
    fm.insert("name".into(), FrontmatterValue::Text(name.into()));
    fm.insert(
        "description".into(),
        FrontmatterValue::Text(truncate_chars(description, MAX_DESCRIPTION_CHARS)),
    );
    fm
}

fn cost_section(note: &str) -> String {
    format!("## Cost\n\nExpected runtime: {note}\n")
}

fn from_prompt(prompt: &str) -> Option<Draft> {
    let words = imperative_phrase(prompt);
    let name = name_from_phrase(&words);
    if name.is_empty() {
        return None;
    }
    let phrase = words.join(" ");
    let action = {
        let mut w = words.clone();
        w[0] = w[0].to_lowercase();
        w.join(" ")
    };
    let description = first_sentence(prompt);
    let instructions = format!(
        "# {title}\n\n{description}\n\n\
         ## Purpose\n\nUse this skill when asked to {action}.\n\n\
         ## Prerequisites\n\n\
         - Access to the input material the request refers to.\n\
         - A working directory where results can be written.\n\n\
         ## Steps\n\n\
         1. Gather the inputs needed to {action}.\n\
         2. Check that the inputs are complete and readable; stop and report if they are not.\n\
         3. {capitalized}, recording intermediate results as you go.\n\
         4. Verify the result against the original request.\n\
         5. Report the outcome and any problems encountered.\n\n{cost}",
        title = capitalize(&phrase),
        capitalized = capitalize(&action),
        cost = cost_section("a few minutes of agent time; no external services are called."),
    );
    Some(Draft {
        frontmatter: frontmatter(&name, &description),
        instructions,
        resources: Vec::new(),
    })
}

fn readme(files: &[RepoFile]) -> Option<&RepoFile> {
    files
        .iter()
        .filter(|f| !f.path.contains('/'))
        .filter(|f| f.path.to_lowercase().starts_with("readme"))
        .min_by(|a, b| a.path.cmp(&b.path))
}

fn interpreter(path: &str) -> Option<&'static str> {
    let ext = path.rsplit_once('.')?.1.to_lowercase();
    SCRIPT_EXTENSIONS
        .iter()
        .find(|(e, _)| *e == ext)
        .map(|(_, interp)| *interp)
}

/// Paragraphs separated by blank lines, each trimmed.
fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}

fn is_heading(paragraph: &str) -> bool {
    paragraph.trim_start().starts_with('#')
}

fn from_repository(files: &[RepoFile]) -> Vec<Draft> {
    let readme = readme(files).map(|f| String::from_utf8_lossy(&f.bytes).into_owned());
    let readme_paras = readme.as_deref().map(paragraphs).unwrap_or_default();
    let summary = readme_paras
        .iter()
        .find(|p| !is_heading(p))
        .map(|p| first_sentence(p));
    let background: String = {
        let body: Vec<&str> = readme_paras
            .iter()
            .skip_while(|p| p.trim_start().starts_with("# "))
            .map(String::as_str)
            .collect();
        truncate_chars(&body.join("\n\n"), MAX_README_CHARS)
    };

    let mut scripts: Vec<&RepoFile> = files
        .iter()
        .filter(|f| !f.path.contains('/') && f.path != SKILL_FILE && interpreter(&f.path).is_some())
        .collect();
    scripts.sort_by(|a, b| a.path.cmp(&b.path));
    scripts.truncate(MAX_REPOSITORY_PACKAGES);

    scripts
        .into_iter()
        .filter_map(|script| {
            let interp = interpreter(&script.path)?;
            let stem = script.path.rsplit_once('.').map_or(script.path.as_str(), |(s, _)| s);
            let name = slugify(stem, MAX_NAME_CHARS);
            if name.is_empty() {
                return None;
            }
            let description = match &summary {
                Some(s) => format!("{s} Runs `{}`.", script.path),
                None => format!("Run the `{}` script from the source repository.", script.path),
            };
            let background = if background.is_empty() {
                String::new()
            } else {
                format!("## Background\n\n{background}\n\n")
            };
            let instructions = format!(
                "# {name}\n\n{background}\
                 ## Prerequisites\n\n\
                 - `{interp}` available on PATH.\n\
                 - Any inputs the background section mentions.\n\n\
                 ## Steps\n\n\
                 1. Read the background section to confirm `{path}` fits the task.\n\
                 2. Run `{interp} {path}` from the skill directory, passing the arguments the task needs.\n\
                 3. Check the exit status and read the script output.\n\
                 4. Report the result, quoting relevant output lines.\n\n{cost}",
                path = script.path,
                cost = cost_section("bounded by the script itself; it runs locally with no network access."),
            );
            let mut fm = frontmatter(&name, &description);
            fm.insert("entry".into(), FrontmatterValue::Text(script.path.clone()));
            Some(Draft {
                frontmatter: fm,
                instructions,
                resources: vec![DraftResource {
                    path: script.path.clone(),
                    content: String::from_utf8_lossy(&script.bytes).into_owned(),
                }],
            })
        })
        .collect()
}

fn from_document(text: &str, filename: &str) -> Option<Draft> {
    let paras = paragraphs(text);
    let first_body = paras.iter().find(|p| !is_heading(p))?;
    let stem = filename
        .rsplit('/')
        .next()
        .unwrap_or(filename)
        .rsplit_once('.')
        .map_or(filename, |(s, _)| s);
    let mut name = slugify(stem, MAX_NAME_CHARS);
    if name.is_empty() {
        name = name_from_phrase(&imperative_phrase(first_body));
    }
    if name.is_empty() {
        return None;
    }
    let description = first_sentence(first_body);
    let mut sections = String::new();
    for (i, p) in paras.iter().enumerate() {
        sections.push_str(&format!("### Section {}\n\n{p}\n\n", i + 1));
    }
    let instructions = format!(
        "# {name}\n\nProcedure distilled from `{filename}`.\n\n\
         ## Prerequisites\n\n- Familiarity with the material in `{filename}`.\n\n\
         ## Source sections\n\n{sections}\
         ## Steps\n\n\
         1. Read the source sections above in order.\n\
         2. Apply the procedure each section describes to the task at hand.\n\
         3. Verify the result against the guidance in the final section.\n\
         4. Report which sections were applied and what changed.\n\n{cost}",
        cost = cost_section("proportional to the length of the source document; no tools beyond reading are required."),
    );
    Some(Draft {
        frontmatter: frontmatter(&name, &description),
        instructions,
        resources: Vec::new(),
    })
}

fn from_trajectory(steps: &[TrajectoryStep]) -> Option<Draft> {
    let actions: Vec<&TrajectoryStep> = steps.iter().filter(|s| !s.action.trim().is_empty()).collect();
    if actions.is_empty() {
        return None;
    }
    let task = actions
        .iter()
        .find(|s| s.actor.eq_ignore_ascii_case("user"))
        .unwrap_or(&actions[0]);
    let name = name_from_phrase(&imperative_phrase(&task.action));
    if name.is_empty() {
        return None;
    }
    let description = first_sentence(&task.action);
    let mut numbered = String::new();
    let mut n = 0;
    for step in actions.iter().filter(|s| !std::ptr::eq(**s, *task) || actions.len() == 1) {
        n += 1;
        let action = step.action.split_whitespace().collect::<Vec<_>>().join(" ");
        numbered.push_str(&format!("{n}. {}\n", capitalize(&action)));
        let observation = first_sentence(&step.observation);
        if !observation.is_empty() {
            numbered.push_str(&format!("   Expected: {observation}\n"));
        }
    }
    let instructions = format!(
        "# {name}\n\nReplays a recorded run that accomplished: {description}\n\n\
         ## Prerequisites\n\n- The same tools and inputs that were available in the recorded run.\n\n\
         ## Steps\n\n{numbered}\n{cost}",
        cost = cost_section(&format!("about {n} tool invocations, as in the recorded run.")),
    );
    Some(Draft {
        frontmatter: frontmatter(&name, &description),
        instructions,
        resources: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::creation::{create_from_source, CreationError};
    use crate::skill::write_archive;

    fn phrase(text: &str) -> String {
        name_from_phrase(&imperative_phrase(text))
    }

    #[test]
    fn prompt_names() {
        assert_eq!(phrase("create a skill for converting CSV to Markdown tables"), "convert-csv-to-markdown-tables");
        assert_eq!(phrase("Write a skill that extracts tables from PDFs."), "extract-tables-from-pdfs");
        assert_eq!(phrase("Summarize meeting notes, then email them"), "summarize-meeting-notes");
        assert_eq!(phrase("Please make a skill to run the test suite"), "run-test-suite");
        assert_eq!(phrase("planning trips"), "planning-trips");
    }

    #[test]
    fn gerunds() {
        assert_eq!(base_verb("converting").as_deref(), Some("convert"));
        assert_eq!(base_verb("parsing").as_deref(), Some("parse"));
        assert_eq!(base_verb("running").as_deref(), Some("run"));
        assert_eq!(base_verb("making").as_deref(), Some("make"));
        assert_eq!(base_verb("extracts").as_deref(), Some("extract"));
        assert_eq!(base_verb("fixes").as_deref(), Some("fix"));
        assert_eq!(base_verb("morning"), None);
    }

    #[test]
    fn prompt_package() {
        let src = SourceInput::Prompt("create a skill for converting CSV to Markdown tables".into());
        let pkgs = create_from_source(&src, &TemplateGenerator).unwrap();
        assert_eq!(pkgs.len(), 1);
        let pkg = &pkgs[0];
        assert_eq!(pkg.name(), "convert-csv-to-markdown-tables");
        assert_eq!(pkg.document.metadata.description, "create a skill for converting CSV to Markdown tables");
        assert!(pkg.document.extra_value("source").unwrap().starts_with("prompt:"));
        let again = create_from_source(&src, &TemplateGenerator).unwrap();
        assert_eq!(write_archive(&again[0]).unwrap(), write_archive(pkg).unwrap());
    }

    #[test]
    fn empty_inputs() {
        for src in [
            SourceInput::TrajectoryLog(vec![]),
            SourceInput::Prompt("   ".into()),
            SourceInput::RepositoryTree(vec![]),
            SourceInput::DocumentText { text: "\n\n".into(), filename: "x.txt".into() },
        ] {
            assert_eq!(create_from_source(&src, &TemplateGenerator).unwrap_err(), CreationError::EmptyGeneration);
        }
    }

    fn repo(scripts: usize) -> SourceInput {
        let mut files = vec![RepoFile {
            path: "README.md".into(),
            bytes: b"# Tools\n\nHandy maintenance scripts for log files. Each one is standalone.\n\nRun them from a shell.\n".to_vec(),
        }];
        for i in 0..scripts {
            files.push(RepoFile { path: format!("tool{i}.sh"), bytes: format!("echo {i}\n").into_bytes() });
        }
        files.push(RepoFile { path: "lib/helper.py".into(), bytes: b"pass\n".to_vec() });
        SourceInput::RepositoryTree(files)
    }

    #[test]
    fn repository_packages() {
        let pkgs = create_from_source(&repo(1), &TemplateGenerator).unwrap();
        assert_eq!(pkgs.len(), 1);
        let pkg = &pkgs[0];
        assert_eq!(pkg.name(), "tool0");
        assert_eq!(pkg.document.entry(), Some("tool0.sh"));
        assert_eq!(pkg.resources.len(), 1);
        assert_eq!(pkg.resources[0].bytes, b"echo 0\n");
        assert!(pkg.document.instructions.contains("Handy maintenance scripts for log files."));
        assert!(pkg.document.metadata.description.starts_with("Handy maintenance scripts for log files."));
        assert_eq!(create_from_source(&repo(7), &TemplateGenerator).unwrap().len(), 5);
    }

    #[test]
    fn document_sections_in_order() {
        let text = "First paragraph explains setup.\n\nSecond paragraph covers the run.\nIt has two lines.\n\nThird paragraph says how to check.\n";
        let pkgs = create_from_source(
            &SourceInput::DocumentText { text: text.into(), filename: "guides/backup-howto.txt".into() },
            &TemplateGenerator,
        )
        .unwrap();
        let body = &pkgs[0].document.instructions;
        assert_eq!(pkgs[0].name(), "backup-howto");
        let p1 = body.find("First paragraph").unwrap();
        let p2 = body.find("Second paragraph covers the run.\nIt has two lines.").unwrap();
        let p3 = body.find("Third paragraph").unwrap();
        assert!(p1 < p2 && p2 < p3);
    }

    #[test]
    fn trajectory_steps() {
        let step = |actor: &str, action: &str, obs: &str| TrajectoryStep {
            actor: actor.into(),
            action: action.into(),
            observation: obs.into(),
        };
        let src = SourceInput::TrajectoryLog(vec![
            step("user", "Rotate the nginx logs", ""),
            step("agent", "list /var/log/nginx", "access.log error.log"),
            step("agent", "run logrotate -f /etc/logrotate.d/nginx", "rotated."),
        ]);
        let pkgs = create_from_source(&src, &TemplateGenerator).unwrap();
        assert_eq!(pkgs[0].name(), "rotate-nginx-logs");
        let body = &pkgs[0].document.instructions;
        assert!(body.contains("1. List /var/log/nginx\n   Expected: access.log error.log\n"));
        assert!(body.contains("2. Run logrotate -f /etc/logrotate.d/nginx\n"));
    }
}
