//! Versioned JSON artifacts, content hashing and stage manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Format version written into every JSON artifact envelope.
pub const FORMAT_VERSION: u32 = 1;
/// Semantic version recorded in manifests.
pub const ARTIFACT_VERSION: &str = "1.0.0";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the compact JSON encoding. Struct fields serialize in declaration
/// order and maps are `BTreeMap`s, so equal values hash equally.
pub fn hash_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub kind: String,
    pub format_version: u32,
    pub payload: T,
}

/// Writes `payload` wrapped in a versioned envelope; returns the file hash.
pub fn write_json<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<String> {
    let env = Envelope { kind: kind.to_string(), format_version: FORMAT_VERSION, payload };
    let mut bytes = serde_json::to_vec_pretty(&env)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Reads an envelope written by [`write_json`], checking kind and version.
pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope<T> = serde_json::from_slice(&bytes)?;
    if env.kind != kind {
        return Err(Error::Format(format!("{}: expected a {kind} artifact, found {}", path.display(), env.kind)));
    }
    if env.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported format version {} (expected {FORMAT_VERSION})",
            path.display(),
            env.format_version
        )));
    }
    Ok(env.payload)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentRef {
    pub id: String,
    pub content_hash: String,
}

/// Record of one pipeline stage's outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub version: String,
    /// Hash over the file entries (paths and hashes, in order).
    pub content_hash: String,
    pub config_hash: String,
    pub parents: Vec<ParentRef>,
    pub files: Vec<FileEntry>,
}

impl ArtifactManifest {
    /// Builds a manifest for files under `dir`, hashing each one.
    pub fn build(id: &str, kind: &str, dir: &Path, files: &[&str], config_hash: &str, parents: Vec<ParentRef>) -> Result<Self> {
        let mut entries = Vec::with_capacity(files.len());
        for f in files {
            entries.push(FileEntry { path: f.to_string(), sha256: hash_file(&dir.join(f))? });
        }
        Ok(Self {
            id: id.to_string(),
            kind: kind.to_string(),
            version: ARTIFACT_VERSION.to_string(),
            content_hash: hash_json(&entries)?,
            config_hash: config_hash.to_string(),
            parents,
            files: entries,
        })
    }

    pub fn path_in(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.manifest.json"))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&Self::path_in(dir, &self.id), "manifest", self).map(|_| ())
    }

    pub fn read(dir: &Path, id: &str) -> Result<Self> {
        read_json(&Self::path_in(dir, id), "manifest")
    }

    pub fn as_parent(&self) -> ParentRef {
        ParentRef { id: self.id.clone(), content_hash: self.content_hash.clone() }
    }

    /// Re-hashes every listed file; returns the first mismatching path.
    pub fn verify_files(&self, dir: &Path) -> Result<Option<String>> {
        for f in &self.files {
            let p = dir.join(&f.path);
            if !p.exists() || hash_file(&p)? != f.sha256 {
                return Ok(Some(f.path.clone()));
            }
        }
        Ok(None)
    }
}
