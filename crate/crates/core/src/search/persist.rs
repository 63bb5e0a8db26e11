//! On-disk form of a [`SearchIndex`]: two versioned JSON files.
//!
//! * `inverted.json`: `{"format": "skillnet-inverted/1", "docs": [IndexedDoc...]}`
//!   with postings and length totals rebuilt on load.
//! * `vectors.json`: `{"format": "skillnet-vectors/1", "embedder": "<identity>",
//!   "dim": N, "vectors": {"<skill_id>": [f64; N]}}`.
//!
//! Both are derived data; the skill store can rebuild them at any time.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, EmbeddingVector, IndexedDoc, SearchIndex};

pub const INVERTED_FILE: &str = "inverted.json";
pub const VECTORS_FILE: &str = "vectors.json";
pub const INVERTED_FORMAT: &str = "skillnet-inverted/1";
pub const VECTORS_FORMAT: &str = "skillnet-vectors/1";

#[derive(Serialize, Deserialize)]
struct InvertedFile {
    format: String,
    docs: Vec<IndexedDoc>,
}

#[derive(Serialize, Deserialize)]
struct VectorsFile {
    format: String,
    embedder: String,
    dim: usize,
    vectors: BTreeMap<String, EmbeddingVector>,
}

/// Location of the two index files.
#[derive(Debug, Clone)]
pub struct IndexFiles {
    pub dir: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn invalid(reason: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, reason.into())
}

impl IndexFiles {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        IndexFiles { dir: dir.into() }
    }

    pub fn save(&self, index: &SearchIndex) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let inverted = InvertedFile {
            format: INVERTED_FORMAT.into(),
            docs: index.docs.values().cloned().collect(),
        };
        let vectors = VectorsFile {
            format: VECTORS_FORMAT.into(),
            embedder: index.embedder_identity.clone(),
            dim: index.dim,
            vectors: index.vectors.clone(),
        };
        write_atomic(&self.dir.join(INVERTED_FILE), &serde_json::to_vec(&inverted)?)?;
        write_atomic(&self.dir.join(VECTORS_FILE), &serde_json::to_vec(&vectors)?)
    }

    /// Loads a saved index built with `embedder`. Fails when the files are
    /// missing, malformed, of an unknown format, built by a different
    /// embedder, or inconsistent with each other.
    pub fn load(&self, embedder: &dyn EmbeddingProvider) -> io::Result<SearchIndex> {
        let inverted: InvertedFile = serde_json::from_slice(&fs::read(self.dir.join(INVERTED_FILE))?)?;
        let vectors: VectorsFile = serde_json::from_slice(&fs::read(self.dir.join(VECTORS_FILE))?)?;
        if inverted.format != INVERTED_FORMAT || vectors.format != VECTORS_FORMAT {
            return Err(invalid("unknown index format"));
        }
        if vectors.embedder != embedder.identity() || vectors.dim != embedder.dim() {
            return Err(invalid(format!(
                "index built by {} (dim {}), configured embedder is {}",
                vectors.embedder,
                vectors.dim,
                embedder.identity()
            )));
        }
        let mut index = SearchIndex::new(embedder);
        let mut vectors = vectors.vectors;
        for doc in inverted.docs {
            if doc.length != doc.token_counts.values().sum::<u32>() {
                return Err(invalid(format!("inconsistent length for {}", doc.skill_id)));
            }
            let vector = vectors
                .remove(&doc.skill_id)
                .filter(|v| v.values.len() == index.dim)
                .ok_or_else(|| invalid(format!("missing or bad vector for {}", doc.skill_id)))?;
            index.insert_parts(doc, vector);
        }
        if !vectors.is_empty() {
            return Err(invalid("vectors for unindexed skills"));
        }
        Ok(index)
    }
}
