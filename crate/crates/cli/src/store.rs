//! Artifact files: atomic writes, content hashes, versioned JSON and the
//! run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Hex SHA-256 of a file, or of a directory tree (relative paths and file
/// hashes in name order).
pub fn content_hash(path: &Path) -> Result<String> {
    if path.is_file() {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(hex::encode(Sha256::digest(&bytes)));
    }
    let mut h = Sha256::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(path).unwrap_or(entry.path());
        let bytes = fs::read(entry.path())?;
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(Sha256::digest(&bytes));
    }
    Ok(hex::encode(h.finalize()))
}

/// Every JSON artifact is wrapped in this.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: String,
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub data: T,
}

pub fn write_json<T: Serialize>(path: &Path, schema: &str, config_hash: &str, seed: u64, data: &T) -> Result<()> {
    let env = Envelope {
        schema: schema.to_string(),
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash.to_string(),
        seed,
        data,
    };
    let mut bytes = serde_json::to_vec_pretty(&env)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Envelope<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let env: Envelope<T> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if env.schema != schema {
        bail!("{}: schema `{}`, expected `{schema}`", path.display(), env.schema);
    }
    if env.schema_version != SCHEMA_VERSION {
        bail!(
            "{}: schema version {}, this build reads {SCHEMA_VERSION}",
            path.display(),
            env.schema_version
        );
    }
    Ok(env)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub seed: u64,
    /// Artifact name → content hash.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub schema_version: u32,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            schema: "smartema.manifest".into(),
            schema_version: SCHEMA_VERSION,
            stages: BTreeMap::new(),
        }
    }
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = fs::read_to_string(&path)?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.schema_version != SCHEMA_VERSION {
            bail!("{}: schema version {}", path.display(), m.schema_version);
        }
        Ok(m)
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&out.join(MANIFEST), &bytes)
    }

    /// Config hash recorded for the stage that wrote `artifact`.
    pub fn hash_of_output(&self, artifact: &str) -> Option<&str> {
        self.stages
            .values()
            .find(|r| r.outputs.contains_key(artifact))
            .map(|r| r.config_hash.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn directory_hash_sees_names_and_content() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x"), "1").unwrap();
        let a = content_hash(dir.path()).unwrap();
        fs::write(dir.path().join("x"), "2").unwrap();
        let b = content_hash(dir.path()).unwrap();
        fs::rename(dir.path().join("x"), dir.path().join("y")).unwrap();
        let c = content_hash(dir.path()).unwrap();
        assert!(a != b && b != c);
    }

    #[test]
    fn envelope_checks_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_json(&p, "smartema.test", "abc", 4, &vec![1.5f64, 2.0]).unwrap();
        let e: Envelope<Vec<f64>> = read_json(&p, "smartema.test").unwrap();
        assert_eq!((e.seed, e.data), (4, vec![1.5, 2.0]));
        assert!(read_json::<Vec<f64>>(&p, "smartema.other").is_err());
    }
}
