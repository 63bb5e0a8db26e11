use std::fmt;
use std::fs;
use std::path::Path;

use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};

use super::path::is_canonical;
use super::{normalize_path, parse_skill_document, SkillDocument, SkillError, SKILL_FILE};

/// A non-document file bundled with a skill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resource {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl Resource {
    pub fn new(path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Resource {
            path: path.into(),
            bytes: bytes.into(),
        }
    }
}

/// Self-contained skill bundle.
///
/// `skill_md` holds the exact `SKILL.md` bytes, which are what the
/// fingerprint hashes; `document` is their parsed form. Fields are public so
/// that invalid packages can be represented and reported on by
/// [`validate_package`]; use the constructors to build valid ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillPackage {
    pub id: String,
    pub document: SkillDocument,
    pub skill_md: Vec<u8>,
    pub resources: Vec<Resource>,
    pub root_listing: Vec<String>,
}

impl SkillPackage {
    /// Builds a package from a document, serializing it canonically.
    pub fn new(document: SkillDocument, resources: Vec<Resource>) -> Result<Self, SkillError> {
        document.metadata.check()?;
        if document.instructions.trim().is_empty() {
            return Err(SkillError::MissingField("instructions"));
        }
        let skill_md = document.to_bytes();
        Self::assemble(document, skill_md, resources)
    }

    /// Builds a package from raw `SKILL.md` bytes, keeping them verbatim.
    pub fn from_raw(skill_md: Vec<u8>, resources: Vec<Resource>) -> Result<Self, SkillError> {
        let document = parse_skill_document(&skill_md)?;
        Self::assemble(document, skill_md, resources)
    }

    fn assemble(
        document: SkillDocument,
        skill_md: Vec<u8>,
        resources: Vec<Resource>,
    ) -> Result<Self, SkillError> {
        let mut normalized = Vec::with_capacity(resources.len());
        for resource in resources {
            let path = normalize_path(&resource.path)?;
            if path == SKILL_FILE {
                return Err(SkillError::InvalidPackage(
                    "a resource may not replace SKILL.md".into(),
                ));
            }
            normalized.push(Resource {
                path,
                bytes: resource.bytes,
            });
        }
        normalized.sort_by(|a, b| a.path.cmp(&b.path));
        if let Some(pair) = normalized.windows(2).find(|w| w[0].path == w[1].path) {
            return Err(SkillError::InvalidPackage(format!(
                "duplicate resource `{}`",
                pair[0].path
            )));
        }

        let mut root_listing: Vec<String> = normalized.iter().map(|r| r.path.clone()).collect();
        root_listing.push(SKILL_FILE.to_string());
        root_listing.sort();

        let id = package_id(&document.metadata.name, &md5_hex(&skill_md));
        Ok(SkillPackage {
            id,
            document,
            skill_md,
            resources: normalized,
            root_listing,
        })
    }

    pub fn name(&self) -> &str {
        &self.document.metadata.name
    }

    pub fn resource(&self, path: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.path == path)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        compute_fingerprint(self)
    }

    /// Bytes of every file in listing order, `SKILL.md` included.
    pub fn files(&self) -> impl Iterator<Item = (&str, &[u8])> {
        self.root_listing.iter().filter_map(move |path| {
            if path == SKILL_FILE {
                Some((path.as_str(), self.skill_md.as_slice()))
            } else {
                self.resource(path).map(|r| (path.as_str(), r.bytes.as_slice()))
            }
        })
    }
}

/// `<normalized-name>--<first 8 hex of doc_hash>`.
pub fn package_id(name: &str, doc_hash: &str) -> String {
    format!("{name}--{}", &doc_hash[..8])
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint {
    pub doc_hash: String,
    pub structure_hash: String,
}

pub fn compute_fingerprint(pkg: &SkillPackage) -> Fingerprint {
    Fingerprint {
        doc_hash: md5_hex(&pkg.skill_md),
        structure_hash: md5_hex(pkg.root_listing.join("\n").as_bytes()),
    }
}

pub fn md5_hex(bytes: &[u8]) -> String {
    let digest = Md5::digest(bytes);
    let mut out = String::with_capacity(32);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Violation {
    PathTraversal(String),
    AbsolutePath(String),
    NonCanonicalPath(String),
    UnlistedResource(String),
    ListedButMissing(String),
    DuplicateResource(String),
    ListingNotSorted,
    ListingDuplicate(String),
    MissingSkillFile,
    ResourceShadowsSkillFile,
    DocumentMismatch(String),
    InvalidMetadata(String),
    InvalidId(String),
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::PathTraversal(_) => "path traversal",
            Violation::AbsolutePath(_) => "absolute path",
            Violation::NonCanonicalPath(_) => "non-canonical path",
            Violation::UnlistedResource(_) => "unlisted resource",
            Violation::ListedButMissing(_) => "listed but missing",
            Violation::DuplicateResource(_) => "duplicate resource",
            Violation::ListingNotSorted => "listing not sorted",
            Violation::ListingDuplicate(_) => "duplicate listing entry",
            Violation::MissingSkillFile => "missing SKILL.md",
            Violation::ResourceShadowsSkillFile => "resource shadows SKILL.md",
            Violation::DocumentMismatch(_) => "document mismatch",
            Violation::InvalidMetadata(_) => "invalid metadata",
            Violation::InvalidId(_) => "invalid id",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PathTraversal(p)
            | Violation::AbsolutePath(p)
            | Violation::NonCanonicalPath(p)
            | Violation::UnlistedResource(p)
            | Violation::ListedButMissing(p)
            | Violation::DuplicateResource(p)
            | Violation::ListingDuplicate(p)
            | Violation::DocumentMismatch(p)
            | Violation::InvalidMetadata(p)
            | Violation::InvalidId(p) => write!(f, "{}: {p}", self.kind()),
            _ => f.write_str(self.kind()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every package invariant and reports all violations found.
pub fn validate_package(pkg: &SkillPackage) -> ValidationResult {
    let mut violations = Vec::new();

    for (i, resource) in pkg.resources.iter().enumerate() {
        let path = &resource.path;
        if path == SKILL_FILE {
            violations.push(Violation::ResourceShadowsSkillFile);
        }
        match normalize_path(path) {
            Err(SkillError::InvalidPath { reason: "path traversal", .. }) => {
                violations.push(Violation::PathTraversal(path.clone()))
            }
            Err(SkillError::InvalidPath { reason: "absolute path", .. }) => {
                violations.push(Violation::AbsolutePath(path.clone()))
            }
            Err(_) => violations.push(Violation::NonCanonicalPath(path.clone())),
            Ok(_) if !is_canonical(path) => {
                violations.push(Violation::NonCanonicalPath(path.clone()))
            }
            Ok(_) => {}
        }
        if pkg.resources[..i].iter().any(|r| &r.path == path) {
            violations.push(Violation::DuplicateResource(path.clone()));
        }
        if !pkg.root_listing.contains(path) {
            violations.push(Violation::UnlistedResource(path.clone()));
        }
    }

    if pkg.root_listing.windows(2).any(|w| w[0] > w[1]) {
        violations.push(Violation::ListingNotSorted);
    }
    for (i, entry) in pkg.root_listing.iter().enumerate() {
        if pkg.root_listing[..i].contains(entry) {
            violations.push(Violation::ListingDuplicate(entry.clone()));
        }
    }
    if !pkg.root_listing.iter().any(|p| p == SKILL_FILE) {
        violations.push(Violation::MissingSkillFile);
    }
    for entry in &pkg.root_listing {
        if entry != SKILL_FILE && pkg.resource(entry).is_none() {
            violations.push(Violation::ListedButMissing(entry.clone()));
        }
    }

    match parse_skill_document(&pkg.skill_md) {
        Ok(parsed) if parsed != pkg.document => violations.push(Violation::DocumentMismatch(
            "SKILL.md bytes do not parse to the package document".into(),
        )),
        Ok(_) => {}
        Err(e) => violations.push(Violation::DocumentMismatch(e.to_string())),
    }
    if let Err(e) = pkg.document.metadata.check() {
        violations.push(Violation::InvalidMetadata(e.to_string()));
    }
    if let Some(entry) = pkg.document.entry() {
        if pkg.resource(entry).is_none() {
            violations.push(Violation::InvalidMetadata(format!(
                "entry `{entry}` is not a bundled resource"
            )));
        }
    }

    let prefix = format!("{}--", pkg.document.metadata.name);
    let suffix_ok = pkg
        .id
        .strip_prefix(&prefix)
        .is_some_and(|rest| rest.len() >= 8 && super::is_slug(rest));
    if !suffix_ok {
        violations.push(Violation::InvalidId(pkg.id.clone()));
    }

    ValidationResult { violations }
}

/// Reads a package from a directory containing `SKILL.md` at its root.
pub fn load_package_dir(root: &Path) -> Result<SkillPackage, SkillError> {
    let mut files = Vec::new();
    collect_files(root, root, &mut files)?;
    let mut skill_md = None;
    let mut resources = Vec::new();
    for (path, bytes) in files {
        if path == SKILL_FILE {
            skill_md = Some(bytes);
        } else {
            resources.push(Resource::new(path, bytes));
        }
    }
    let skill_md = skill_md.ok_or_else(|| {
        SkillError::InvalidPackage(format!("no {SKILL_FILE} in {}", root.display()))
    })?;
    SkillPackage::from_raw(skill_md, resources)
}

fn collect_files(
    root: &Path,
    dir: &Path,
    out: &mut Vec<(String, Vec<u8>)>,
) -> Result<(), SkillError> {
    let mut entries = fs::read_dir(dir)?.collect::<Result<Vec<_>, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        let file_type = entry.file_type()?;
        if file_type.is_dir() {
            collect_files(root, &path, out)?;
        } else if file_type.is_file() {
            let rel = path
                .strip_prefix(root)
                .expect("walked path is under root")
                .to_string_lossy()
                .into_owned();
            out.push((normalize_path(&rel)?, fs::read(&path)?));
        } else {
            return Err(SkillError::InvalidPackage(format!(
                "unsupported file type at {}",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Materializes a package into `dest`, creating it if needed.
pub fn write_package_dir(pkg: &SkillPackage, dest: &Path) -> Result<(), SkillError> {
    fs::create_dir_all(dest)?;
    for (path, bytes) in pkg.files() {
        let target = dest.join(path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(target, bytes)?;
    }
    Ok(())
}
