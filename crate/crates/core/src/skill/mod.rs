//! Canonical skill package representation.
//!
//! A skill is a directory-shaped bundle: one `SKILL.md` document (frontmatter
//! metadata plus a markdown instruction body) and optional resource files.
//! Identity for deduplication is the pair of MD5 digests in [`Fingerprint`].

mod archive;
mod frontmatter;
mod package;
mod path;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use archive::{read_archive, write_archive};
pub use frontmatter::{parse_skill_document, serialize_skill_document};
pub use package::{
    compute_fingerprint, load_package_dir, md5_hex, package_id, validate_package, write_package_dir,
    Fingerprint,
    Resource, SkillPackage, ValidationResult, Violation,
};
pub use path::normalize_path;

/// File name of the central skill document inside a package.
pub const SKILL_FILE: &str = "SKILL.md";

pub const MAX_NAME_CHARS: usize = 128;
pub const MAX_DESCRIPTION_CHARS: usize = 1024;
pub const MAX_TAGS: usize = 16;
pub const DEFAULT_VERSION: &str = "0.1.0";

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("malformed frontmatter: {0}")]
    MalformedFrontmatter(String),
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("invalid category `{0}`")]
    InvalidCategory(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("invalid path `{path}`: {reason}")]
    InvalidPath { path: String, reason: &'static str },
    #[error("malformed archive: {0}")]
    MalformedArchive(String),
    #[error("invalid package: {0}")]
    InvalidPackage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The ten functional categories. Closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Development,
    #[serde(rename = "AIGC")]
    Aigc,
    Research,
    Science,
    Business,
    Testing,
    Productivity,
    Security,
    Lifestyle,
    Other,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Development,
        Category::Aigc,
        Category::Research,
        Category::Science,
        Category::Business,
        Category::Testing,
        Category::Productivity,
        Category::Security,
        Category::Lifestyle,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Development => "Development",
            Category::Aigc => "AIGC",
            Category::Research => "Research",
            Category::Science => "Science",
            Category::Business => "Business",
            Category::Testing => "Testing",
            Category::Productivity => "Productivity",
            Category::Security => "Security",
            Category::Lifestyle => "Lifestyle",
            Category::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = SkillError;

    /// Case-insensitive match against the display names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| SkillError::InvalidCategory(trimmed.to_string()))
    }
}

/// A lowercase retrieval tag, `[a-z0-9][a-z0-9-]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Tag(String);

impl Tag {
    pub fn new(raw: impl Into<String>) -> Result<Self, SkillError> {
        let raw = raw.into();
        if is_slug(&raw) {
            Ok(Tag(raw))
        } else {
            Err(SkillError::InvalidField {
                field: "tags",
                reason: format!("`{raw}` is not a lowercase token"),
            })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Tag {
    type Error = SkillError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Tag::new(value)
    }
}

impl From<Tag> for String {
    fn from(tag: Tag) -> Self {
        tag.0
    }
}

/// `[a-z0-9][a-z0-9-]*`
pub(crate) fn is_slug(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

/// Lowercases, trims, and turns whitespace runs into single hyphens.
///
/// Idempotent. The result is not guaranteed to be a valid skill name; use
/// [`is_valid_name`] for that.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace()
        .map(|part| part.to_lowercase())
        .collect::<Vec<_>>()
        .join("-")
}

pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().count() <= MAX_NAME_CHARS && is_slug(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillMetadata {
    pub name: String,
    pub description: String,
    pub category: Category,
    pub tags: Vec<Tag>,
    pub version: String,
    pub usage_conditions: Option<String>,
}

impl SkillMetadata {
    pub fn new(name: &str, description: &str, category: Category) -> Self {
        SkillMetadata {
            name: normalize_name(name),
            description: description.trim().to_string(),
            category,
            tags: Vec::new(),
            version: DEFAULT_VERSION.to_string(),
            usage_conditions: None,
        }
    }

    /// Checks the field invariants that parsing also enforces.
    pub fn check(&self) -> Result<(), SkillError> {
        if self.name.is_empty() {
            return Err(SkillError::MissingField("name"));
        }
        if !is_valid_name(&self.name) {
            return Err(SkillError::InvalidField {
                field: "name",
                reason: format!("`{}` must match [a-z0-9][a-z0-9-]* and be at most {MAX_NAME_CHARS} chars", self.name),
            });
        }
        if self.description.trim().is_empty() {
            return Err(SkillError::MissingField("description"));
        }
        if self.description.chars().count() > MAX_DESCRIPTION_CHARS {
            return Err(SkillError::InvalidField {
                field: "description",
                reason: format!("longer than {MAX_DESCRIPTION_CHARS} chars"),
            });
        }
        let single_line = [
            ("description", Some(self.description.as_str())),
            ("version", Some(self.version.as_str())),
            ("usage_conditions", self.usage_conditions.as_deref()),
        ];
        for (field, value) in single_line {
            if value.is_some_and(|v| v.contains(['\n', '\r'])) {
                return Err(SkillError::InvalidField {
                    field,
                    reason: "must be a single line".into(),
                });
            }
        }
        if self.tags.len() > MAX_TAGS {
            return Err(SkillError::InvalidField {
                field: "tags",
                reason: format!("more than {MAX_TAGS} tags"),
            });
        }
        for (i, tag) in self.tags.iter().enumerate() {
            if self.tags[..i].contains(tag) {
                return Err(SkillError::InvalidField {
                    field: "tags",
                    reason: format!("duplicate tag `{tag}`"),
                });
            }
        }
        Ok(())
    }
}

/// Parsed `SKILL.md`.
///
/// `extra` keeps unknown frontmatter keys in their original order so they
/// survive re-serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDocument {
    pub metadata: SkillMetadata,
    pub extra: Vec<(String, String)>,
    pub instructions: String,
}

impl SkillDocument {
    pub fn new(metadata: SkillMetadata, instructions: impl Into<String>) -> Self {
        SkillDocument {
            metadata,
            extra: Vec::new(),
            instructions: instructions.into(),
        }
    }

    pub fn extra_value(&self, key: &str) -> Option<&str> {
        self.extra
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Sets an extra key, replacing an existing value in place.
    pub fn set_extra(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.extra.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.extra.push((key.to_string(), value)),
        }
    }

    /// Relative path of the declared entry script (`entry` key).
    pub fn entry(&self) -> Option<&str> {
        self.extra_value("entry").filter(|v| !v.is_empty())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serialize_skill_document(self).into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn category_parsing_is_case_insensitive() {
        assert_eq!("aigc".parse::<Category>().unwrap(), Category::Aigc);
        assert_eq!("Testing".parse::<Category>().unwrap(), Category::Testing);
        assert!(matches!(
            "Gardening".parse::<Category>(),
            Err(SkillError::InvalidCategory(_))
        ));
    }

    #[test]
    fn category_serde_uses_display_names() {
        assert_eq!(serde_json::to_string(&Category::Aigc).unwrap(), "\"AIGC\"");
        for c in Category::ALL {
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{c}\""));
        }
    }

    #[test]
    fn normalize_name_examples() {
        assert_eq!(normalize_name("  PDF   Extract "), "pdf-extract");
        assert_eq!(normalize_name("already-fine"), "already-fine");
        assert!(!is_valid_name(&normalize_name("bad_name")));
        assert!(!is_valid_name("-leading"));
    }

    #[test]
    fn tags_reject_uppercase_and_spaces() {
        assert!(Tag::new("pdf").is_ok());
        assert!(Tag::new("Pdf").is_err());
        assert!(Tag::new("two words").is_err());
        assert!(Tag::new("").is_err());
    }

    proptest! {
        #[test]
        fn normalize_name_is_idempotent(raw in "\\PC{0,40}") {
            let once = normalize_name(&raw);
            prop_assert_eq!(normalize_name(&once), once.clone());
        }
    }
}
