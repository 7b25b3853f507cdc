use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const MANIFEST: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce a stage: its name, the exact inputs that
/// were hashed, and the digests of the files it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub hash: String,
    pub seed: u64,
    pub crate_version: String,
    pub upstream: BTreeMap<String, String>,
    pub inputs: serde_json::Value,
    /// File name -> SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

/// Identity of one stage run: `<out>/<stage>/<hash>/`.
#[derive(Debug, Clone)]
pub struct StageKey {
    pub stage: &'static str,
    pub seed: u64,
    pub upstream: BTreeMap<String, String>,
    pub inputs: serde_json::Value,
    pub hash: String,
}

impl StageKey {
    pub fn new(stage: &'static str, seed: u64, upstream: &[(&str, &str)], inputs: serde_json::Value) -> Result<Self> {
        let upstream: BTreeMap<String, String> = upstream.iter().map(|(k, v)| ((*k).to_owned(), (*v).to_owned())).collect();
        let doc = serde_json::json!({
            "stage": stage,
            "seed": seed,
            "version": env!("CARGO_PKG_VERSION"),
            "upstream": upstream,
            "inputs": inputs,
        });
        let hash = sha256_hex(serde_json::to_string(&doc)?.as_bytes())[..16].to_owned();
        Ok(Self { stage, seed, upstream, inputs, hash })
    }

    pub fn dir(&self, out: &Path) -> PathBuf {
        out.join(self.stage).join(&self.hash)
    }
}

/// A stage directory being written. Files go in atomically; the manifest
/// is written last and marks the stage complete.
pub struct StageWriter {
    key: StageKey,
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl StageWriter {
    pub fn new(key: StageKey, out: &Path) -> Result<Self> {
        let dir = key.dir(out);
        std::fs::create_dir_all(&dir)?;
        Ok(Self { key, dir, files: BTreeMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.insert(name.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    /// Records a file already written by another routine.
    pub fn adopt(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.dir.join(name))?;
        self.files.insert(name.to_owned(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest {
            stage: self.key.stage.to_owned(),
            hash: self.key.hash.clone(),
            seed: self.key.seed,
            crate_version: env!("CARGO_PKG_VERSION").to_owned(),
            upstream: self.key.upstream.clone(),
            inputs: self.key.inputs.clone(),
            files: self.files,
        };
        write_atomic(&self.dir.join(MANIFEST), &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(self.dir)
    }
}

/// Loads and verifies a completed stage. A missing manifest is a missing
/// artifact; a manifest or file that disagrees with the expected hash is a
/// hash mismatch.
pub fn open_stage(key: &StageKey, out: &Path) -> Result<PathBuf> {
    let dir = key.dir(out);
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&path)?)?;
    if manifest.hash != key.hash {
        return Err(Error::HashMismatch { expected: key.hash.clone(), found: manifest.hash });
    }
    for (name, digest) in &manifest.files {
        let file = dir.join(name);
        if !file.exists() {
            return Err(Error::MissingArtifact(file));
        }
        let found = sha256_hex(&std::fs::read(&file)?);
        if &found != digest {
            return Err(Error::HashMismatch { expected: digest.clone(), found });
        }
    }
    Ok(dir)
}

/// True when the stage already completed with identical inputs.
pub fn is_complete(key: &StageKey, out: &Path) -> bool {
    open_stage(key, out).is_ok()
}
