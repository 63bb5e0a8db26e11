//! `---`-delimited `key: value` frontmatter.
//!
//! One key per line, values are literal strings with surrounding whitespace
//! trimmed. `tags` is a comma-separated list. Keys other than the known
//! metadata fields are kept verbatim, in order, in [`SkillDocument::extra`].

use super::{
    normalize_name, Category, SkillDocument, SkillError, SkillMetadata, Tag, DEFAULT_VERSION,
};

const DELIMITER: &str = "---";
const KNOWN_KEYS: [&str; 6] = [
    "name",
    "description",
    "category",
    "tags",
    "version",
    "usage_conditions",
];

pub fn parse_skill_document(raw: &[u8]) -> Result<SkillDocument, SkillError> {
    let text = std::str::from_utf8(raw)
        .map_err(|e| SkillError::MalformedFrontmatter(format!("not UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let (first, mut rest) = split_line(text);
    if first.trim_end_matches('\r') != DELIMITER {
        return Err(SkillError::MalformedFrontmatter(
            "document must start with a `---` line".into(),
        ));
    }

    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut closed = false;
    while !rest.is_empty() {
        let (line, tail) = split_line(rest);
        rest = tail;
        let line = line.trim_end_matches('\r');
        if line == DELIMITER {
            closed = true;
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| {
            SkillError::MalformedFrontmatter(format!("expected `key: value`, got `{line}`"))
        })?;
        let key = key.trim();
        if key.is_empty() || key.chars().any(char::is_whitespace) {
            return Err(SkillError::MalformedFrontmatter(format!(
                "invalid key in `{line}`"
            )));
        }
        if pairs.iter().any(|(k, _)| k == key) {
            return Err(SkillError::MalformedFrontmatter(format!(
                "duplicate key `{key}`"
            )));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    if !closed {
        return Err(SkillError::MalformedFrontmatter(
            "missing closing `---` line".into(),
        ));
    }

    let instructions = rest.to_string();
    let take = |key: &str| {
        pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .filter(|v| !v.is_empty())
    };

    let name = take("name").ok_or(SkillError::MissingField("name"))?;
    let description = take("description").ok_or(SkillError::MissingField("description"))?;
    let category = match take("category") {
        Some(raw) => raw.parse::<Category>()?,
        None => Category::Other,
    };
    let tags = match take("tags") {
        Some(raw) => raw
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Tag::new)
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };

    let metadata = SkillMetadata {
        name: normalize_name(&name),
        description,
        category,
        tags,
        version: take("version").unwrap_or_else(|| DEFAULT_VERSION.to_string()),
        usage_conditions: take("usage_conditions"),
    };
    metadata.check()?;
    if instructions.trim().is_empty() {
        return Err(SkillError::MissingField("instructions"));
    }

    let extra = pairs
        .into_iter()
        .filter(|(k, _)| !KNOWN_KEYS.contains(&k.as_str()))
        .collect();

    Ok(SkillDocument {
        metadata,
        extra,
        instructions,
    })
}

/// Canonical serialization. Known keys come first in a fixed order, then
/// extra keys in their stored order.
pub fn serialize_skill_document(doc: &SkillDocument) -> String {
    let meta = &doc.metadata;
    let mut out = String::with_capacity(doc.instructions.len() + 256);
    out.push_str(DELIMITER);
    out.push('\n');
    push_pair(&mut out, "name", &meta.name);
    push_pair(&mut out, "description", &meta.description);
    push_pair(&mut out, "category", meta.category.as_str());
    if !meta.tags.is_empty() {
        let joined = meta
            .tags
            .iter()
            .map(Tag::as_str)
            .collect::<Vec<_>>()
            .join(", ");
        push_pair(&mut out, "tags", &joined);
    }
    push_pair(&mut out, "version", &meta.version);
    if let Some(usage) = &meta.usage_conditions {
        push_pair(&mut out, "usage_conditions", usage);
    }
    for (k, v) in &doc.extra {
        push_pair(&mut out, k, v);
    }
    out.push_str(DELIMITER);
    out.push('\n');
    out.push_str(&doc.instructions);
    out
}

fn push_pair(out: &mut String, key: &str, value: &str) {
    out.push_str(key);
    out.push_str(": ");
    out.push_str(value);
    out.push('\n');
}

/// Splits off the first line; the returned tail starts after the `\n`.
fn split_line(text: &str) -> (&str, &str) {
    match text.find('\n') {
        Some(i) => (&text[..i], &text[i + 1..]),
        None => (text, ""),
    }
}
