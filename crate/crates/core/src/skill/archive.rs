//! Deterministic tar archives.
//!
//! Entries follow `root_listing` order with zeroed timestamps, uid/gid 0,
//! empty owner names and mode 0644, so equal packages produce equal bytes.

use std::io::{Cursor, Read};

use super::{normalize_path, Resource, SkillError, SkillPackage, SKILL_FILE};

const ENTRY_MODE: u32 = 0o644;

pub fn write_archive(pkg: &SkillPackage) -> Result<Vec<u8>, SkillError> {
    let mut builder = tar::Builder::new(Vec::new());
    builder.mode(tar::HeaderMode::Deterministic);
    for (path, bytes) in pkg.files() {
        let mut header = tar::Header::new_gnu();
        header.set_entry_type(tar::EntryType::Regular);
        header.set_size(bytes.len() as u64);
        header.set_mode(ENTRY_MODE);
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        builder.append_data(&mut header, path, bytes)?;
    }
    Ok(builder.into_inner()?)
}

/// Reads an archive produced by [`write_archive`] or any tar with `SKILL.md`
/// at its root. Only regular files and directories are accepted.
pub fn read_archive(bytes: &[u8]) -> Result<SkillPackage, SkillError> {
    let malformed = |e: std::io::Error| SkillError::MalformedArchive(e.to_string());
    let mut archive = tar::Archive::new(Cursor::new(bytes));
    let mut skill_md = None;
    let mut resources = Vec::new();
    let mut seen = std::collections::BTreeSet::new();

    for entry in archive.entries().map_err(malformed)? {
        let mut entry = entry.map_err(malformed)?;
        let raw_path = entry
            .path()
            .map_err(malformed)?
            .to_string_lossy()
            .into_owned();
        match entry.header().entry_type() {
            tar::EntryType::Directory => continue,
            tar::EntryType::Regular | tar::EntryType::Continuous => {}
            other => {
                return Err(SkillError::MalformedArchive(format!(
                    "unsupported entry type {other:?} at `{raw_path}`"
                )))
            }
        }
        let path = normalize_path(&raw_path)?;
        if !seen.insert(path.clone()) {
            return Err(SkillError::MalformedArchive(format!(
                "duplicate entry `{path}`"
            )));
        }
        let mut data = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut data).map_err(malformed)?;
        if path == SKILL_FILE {
            skill_md = Some(data);
        } else {
            resources.push(Resource::new(path, data));
        }
    }

    let skill_md = skill_md
        .ok_or_else(|| SkillError::MalformedArchive(format!("no {SKILL_FILE} entry")))?;
    SkillPackage::from_raw(skill_md, resources)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skill::{Category, SkillDocument, SkillMetadata};

    fn package() -> SkillPackage {
        let mut doc = SkillDocument::new(
            SkillMetadata::new("hello", "Say hello", Category::Other),
            "1. Run `run.sh`.\n",
        );
        doc.set_extra("entry", "run.sh");
        SkillPackage::new(
            doc,
            vec![
                Resource::new("run.sh", "echo hello\n"),
                Resource::new(
                    "deeply/nested/directory/with/a/rather/long/name/that/exceeds/the/classic/ustar/limit/of/one/hundred/bytes.txt",
                    "x",
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn archives_are_deterministic_and_round_trip() {
        let pkg = package();
        let a = write_archive(&pkg).unwrap();
        let b = write_archive(&pkg.clone()).unwrap();
        assert_eq!(a, b);
        assert_eq!(read_archive(&a).unwrap(), pkg);
    }

    #[test]
    fn entries_follow_listing_order() {
        let pkg = package();
        let bytes = write_archive(&pkg).unwrap();
        let mut archive = tar::Archive::new(Cursor::new(bytes));
        let paths: Vec<String> = archive
            .entries()
            .unwrap()
            .map(|e| e.unwrap().path().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(paths, pkg.root_listing);
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(read_archive(b"definitely not a tarball").is_err());
        let empty = tar::Builder::new(Vec::new()).into_inner().unwrap();
        assert!(matches!(
            read_archive(&empty),
            Err(SkillError::MalformedArchive(_))
        ));
    }
}
