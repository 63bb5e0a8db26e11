use unicode_normalization::UnicodeNormalization;

use super::SkillError;

/// Canonical form of a package-relative path: forward slashes, NFC, no
/// empty or `.` segments. Absolute paths and `..` segments are rejected.
pub fn normalize_path(raw: &str) -> Result<String, SkillError> {
    let invalid = |reason| SkillError::InvalidPath {
        path: raw.to_string(),
        reason,
    };
    let unified: String = raw.replace('\\', "/").nfc().collect();
    if unified.starts_with('/') || has_drive_prefix(&unified) {
        return Err(invalid("absolute path"));
    }
    let mut segments = Vec::new();
    for segment in unified.split('/') {
        match segment {
            "" | "." => continue,
            ".." => return Err(invalid("path traversal")),
            s if s.chars().any(char::is_control) => return Err(invalid("control character")),
            s => segments.push(s),
        }
    }
    if segments.is_empty() {
        return Err(invalid("empty path"));
    }
    Ok(segments.join("/"))
}

fn has_drive_prefix(path: &str) -> bool {
    let bytes = path.as_bytes();
    bytes.len() >= 2 && bytes[0].is_ascii_alphabetic() && bytes[1] == b':'
}

/// True when `path` is already in canonical form.
pub(crate) fn is_canonical(path: &str) -> bool {
    normalize_path(path).is_ok_and(|n| n == path)
}
