use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

/// Record of one run: what went in, what came out, and how to repeat it.
#[derive(Debug, Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    subcommand: String,
    seed: Option<u64>,
    options: BTreeMap<String, String>,
    out_dir: String,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(subcommand: &str, out_dir: &Path, seed: Option<u64>) -> Self {
        Self {
            tool: "stiffcal",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            options: BTreeMap::new(),
            out_dir: out_dir.display().to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn option(&mut self, key: &str, value: impl ToString) {
        self.options.insert(key.to_string(), value.to_string());
    }

    /// Reads an input file, recording its digest before anything parses it.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn read_input_text(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read_input(path)?;
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 text", path.display()))
    }

    /// Writes `name` under the output directory and records its digest.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = Path::new(&self.out_dir).join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn finish(self) -> Result<()> {
        let path = Path::new(&self.out_dir).join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}
