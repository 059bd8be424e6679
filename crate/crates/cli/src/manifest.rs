//! `manifest.json`, written next to every command's outputs.
//!
//! ```json
//! {
//!   "tool": "trecdl",
//!   "version": "0.1.0",
//!   "command": "lou",
//!   "parameters": { ... every setting except the output directory ... },
//!   "seeds": [1, 2, 3],
//!   "inputs": [{ "path": "runs/a.run", "bytes": 1234, "sha256": "..." }],
//!   "outputs": [{ "path": "lou.tsv", "bytes": 456, "sha256": "..." }]
//! }
//! ```
//!
//! Nothing time-dependent goes in, so a rerun with the same inputs and seeds
//! produces the same manifest byte for byte.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    fn of(shown: String, path: &Path) -> Result<Self> {
        let data = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        let digest = Sha256::digest(&data);
        Ok(Self {
            path: shown,
            bytes: data.len() as u64,
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

/// Collects what a command read and wrote.
pub struct Recorder {
    out: PathBuf,
    command: &'static str,
    parameters: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn new(out: &Path, command: &'static str, parameters: impl Serialize) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            out: out.to_path_buf(),
            command,
            parameters: serde_json::to_value(parameters)?,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    pub fn seeds(&mut self, seeds: &[u64]) {
        self.seeds.extend_from_slice(seeds);
    }

    /// Path of an output file under the output directory, recorded for the manifest.
    pub fn output(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_owned());
        }
        self.out.join(name)
    }

    pub fn write(&mut self, name: &str, data: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.output(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| FileEntry::of(p.display().to_string(), p))
            .collect::<Result<Vec<_>>>()?;
        let mut outputs = self
            .outputs
            .iter()
            .map(|name| FileEntry::of(name.clone(), &self.out.join(name)))
            .collect::<Result<Vec<_>>>()?;
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: "trecdl",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            parameters: self.parameters,
            seeds: self.seeds,
            inputs,
            outputs,
        };
        let path = self.out.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_hashed_outputs_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Recorder::new(dir.path(), "test", serde_json::json!({"k": 1})).unwrap();
        r.write("b.txt", "b").unwrap();
        r.write("a.txt", "abc").unwrap();
        r.seeds(&[3, 1]);
        r.finish().unwrap();
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["outputs"][0]["path"], "a.txt");
        assert_eq!(
            m["outputs"][0]["sha256"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(m["outputs"][0]["bytes"], 3);
        assert_eq!(m["seeds"], serde_json::json!([3, 1]));
        assert!(m.get("timestamp").is_none());
    }
}
