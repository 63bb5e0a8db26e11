//! Small text utilities shared by creation, curation, evaluation and search.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

/// Lowercase, split on any non-alphanumeric character, drop tokens shorter
/// than two characters. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Common verbs that open an imperative instruction bullet.
pub const IMPERATIVE_VERBS: &[&str] = &[
    "add", "analyze", "apply", "ask", "build", "call", "check", "choose", "clean", "clone",
    "collect", "combine", "commit", "compare", "compile", "compute", "configure", "confirm",
    "connect", "convert", "copy", "create", "define", "delete", "deploy", "describe", "detect",
    "download", "draft", "edit", "enable", "ensure", "enter", "evaluate", "execute", "export",
    "extract", "fetch", "fill", "filter", "find", "fix", "format", "generate", "identify",
    "import", "inspect", "install", "launch", "list", "load", "locate", "make", "map", "measure",
    "merge", "move", "note", "open", "parse", "paste", "plot", "prepare", "print", "read",
    "record", "remove", "rename", "render", "replace", "report", "request", "resolve", "restart",
    "return", "review", "run", "save", "scan", "search", "select", "send", "set", "sort",
    "split", "start", "stop", "submit", "summarize", "test", "transform", "translate", "update",
    "upload", "use", "validate", "verify", "visit", "wait", "write",
];

pub const STOPWORDS: &[&str] = &[
    "a", "about", "all", "an", "and", "any", "are", "as", "at", "be", "by", "can", "do", "does",
    "for", "from", "has", "have", "how", "if", "in", "into", "is", "it", "its", "of", "on", "or",
    "our", "skill", "so", "such", "than", "that", "the", "their", "them", "then", "these", "this",
    "those", "to", "up", "use", "used", "uses", "using", "via", "was", "we", "what", "when",
    "which", "while", "who", "will", "with", "within", "without", "you", "your",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

fn numbered_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d{1,3}[.)]\s+\S").expect("numbered regex"))
}

fn bullet_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*[-*+]\s+(?:\*\*|`)?([A-Za-z]+)").expect("bullet regex")
    })
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(todo|fixme|lorem\s+ipsum)\b").expect("placeholder regex"))
}

/// True for a numbered line (`1. ...`, `2) ...`) or a bullet opening with an
/// imperative verb.
pub fn is_step_marker(line: &str) -> bool {
    if numbered_line().is_match(line) {
        return true;
    }
    bullet_line()
        .captures(line)
        .and_then(|c| c.get(1))
        .is_some_and(|verb| {
            IMPERATIVE_VERBS
                .binary_search(&verb.as_str().to_lowercase().as_str())
                .is_ok()
        })
}

/// Number of distinct step-marker lines.
pub fn step_markers(text: &str) -> usize {
    text.lines()
        .filter(|l| is_step_marker(l))
        .map(str::trim)
        .collect::<BTreeSet<_>>()
        .len()
}

/// Distinct placeholder markers found (lowercased, whitespace collapsed).
pub fn placeholder_markers(text: &str) -> Vec<String> {
    placeholder_re()
        .find_iter(text)
        .map(|m| m.as_str().split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// First sentence of `text`: up to and including the first `.`, `!` or `?`
/// followed by whitespace or end of text, whitespace collapsed.
pub fn first_sentence(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = collapsed.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace()) {
            return chars[..=i].iter().collect();
        }
    }
    collapsed
}

/// Truncates to at most `max` characters on a word boundary where possible.
pub fn truncate_chars(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let cut: String = text.chars().take(max).collect();
    match cut.rfind(' ') {
        Some(i) if i > max / 2 => cut[..i].to_string(),
        _ => cut,
    }
}

/// Lowercase ASCII slug: runs of anything other than `[a-z0-9]` become one
/// hyphen, leading and trailing hyphens are dropped, and the result is cut
/// to `max` characters without a trailing hyphen.
pub fn slugify(text: &str, max: usize) -> String {
    let mut slug = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_lowercase() || c.is_ascii_digit() {
            slug.push(c);
        } else if !slug.is_empty() && !slug.ends_with('-') {
            slug.push('-');
        }
    }
    slug.truncate(max);
    slug.trim_end_matches('-').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Extract PDF text!"), vec!["extract", "pdf", "text"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("C3-PO unit"), vec!["c3", "po", "unit"]);
        assert!(tokenize("a b c ! ?").is_empty());
    }

    #[test]
    fn word_lists_are_sorted_for_binary_search() {
        assert!(IMPERATIVE_VERBS.windows(2).all(|w| w[0] < w[1]));
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn step_marker_detection() {
        assert!(is_step_marker("1. Open the file"));
        assert!(is_step_marker("  12) Save"));
        assert!(is_step_marker("- Run the script"));
        assert!(is_step_marker("* **Install** deps"));
        assert!(!is_step_marker("- The output is a table"));
        assert!(!is_step_marker("2024 was a year"));
        assert_eq!(step_markers("1. Open\n1. Open\n2. Save\n"), 2);
    }

    #[test]
    fn placeholders() {
        assert_eq!(placeholder_markers("TODO: fill in"), vec!["todo"]);
        assert_eq!(placeholder_markers("Lorem   Ipsum dolor, fixme"), vec!["fixme", "lorem ipsum"]);
        assert!(placeholder_markers("a todolist app; mastodon").is_empty());
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("Convert CSV -> Markdown!", 64), "convert-csv-markdown");
        assert_eq!(slugify("  __init__.py ", 64), "init-py");
        assert_eq!(slugify("abc-def", 4), "abc");
        assert_eq!(slugify("日本", 10), "");
    }

    #[test]
    fn sentences() {
        assert_eq!(first_sentence("Convert files. Then more."), "Convert files.");
        assert_eq!(first_sentence("v1.2 is out\nnow"), "v1.2 is out now");
    }
}
