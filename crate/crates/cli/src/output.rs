//! Output files and the run manifest.
//!
//! Every file is written to a temporary name and renamed into place, so a
//! reader never sees a half-written file. The manifest is written last and
//! lists each file with its SHA-256.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA: &str = "run-manifest/1";
pub const MANIFEST_NAME: &str = "manifest.json";
pub const OUT_DIR_ENV: &str = "LIYAU_OUT_DIR";

/// `--out`, then `$LIYAU_OUT_DIR`, then `./liyau-out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("liyau-out"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    /// `ok`, `verification-failure` or `computation-error`.
    pub status: String,
    pub error: Option<String>,
    pub verdicts: BTreeMap<String, String>,
    pub runtime_s: f64,
    pub files: Vec<FileRecord>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        write_atomic(&self.root.join(name), contents.as_bytes())?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord { name: name.to_string(), bytes: contents.len() as u64, sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        s.push('\n');
        self.write(name, &s)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes the manifest, filling in the file inventory.
    pub fn finish(self, mut manifest: Manifest) -> io::Result<()> {
        manifest.files = self.files;
        let mut s = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        s.push('\n');
        write_atomic(&self.root.join(MANIFEST_NAME), s.as_bytes())
    }
}

/// Re-hashes every file listed in the manifest of `dir`; returns the names that do not match.
pub fn verify_manifest(dir: &Path) -> io::Result<Vec<String>> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    let m: Manifest = serde_json::from_str(&text).map_err(io::Error::other)?;
    let mut bad = Vec::new();
    for f in &m.files {
        match fs::read(dir.join(&f.name)) {
            Ok(b) if b.len() as u64 == f.bytes && sha256_hex(&b) == f.sha256 => {}
            _ => bad.push(f.name.clone()),
        }
    }
    Ok(bad)
}
