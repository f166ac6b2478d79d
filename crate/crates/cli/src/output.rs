//! Staged result files and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects outputs in a hidden directory under `out` and moves them into
/// place only on success; dropping it unfinished removes everything.
pub struct Staging {
    out: PathBuf,
    dir: TempDir,
    files: Vec<String>,
}

impl Staging {
    pub fn new(out: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(out)?;
        let dir = tempfile::Builder::new().prefix(".staging-").tempdir_in(out)?;
        Ok(Self { out: out.to_path_buf(), dir, files: Vec::new() })
    }

    /// Writes one file through a buffered writer.
    pub fn write<E>(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<(), E>) -> Result<(), E>
    where
        E: From<std::io::Error>,
    {
        let file = File::create(self.dir.path().join(name))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")
        })
    }

    /// Hashes every staged file, writes the manifest and moves all files
    /// into the output directory.
    pub fn commit(mut self, manifest: ManifestInfo<'_>) -> std::io::Result<Vec<PathBuf>> {
        let mut outputs = BTreeMap::new();
        for name in &self.files {
            outputs.insert(name.clone(), sha256_hex(&std::fs::read(self.dir.path().join(name))?));
        }
        let doc = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: manifest.command,
            seed: manifest.seed,
            config_sha256: sha256_hex(manifest.config_json.as_bytes()),
            config_file: "config.json",
            wall_time_s: manifest.wall_time_s,
            outputs,
        };
        self.write_json("manifest.json", &doc)?;
        let mut placed = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let dest = self.out.join(name);
            std::fs::rename(self.dir.path().join(name), &dest)?;
            placed.push(dest);
        }
        Ok(placed)
    }
}

pub struct ManifestInfo<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub config_json: &'a str,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    seed: u64,
    config_sha256: String,
    config_file: &'a str,
    wall_time_s: f64,
    /// File name to SHA-256 of its contents.
    outputs: BTreeMap<String, String>,
}
