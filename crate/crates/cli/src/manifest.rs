use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{AtPath, Result};

/// `sha256("blob <len>\0" ++ bytes)`, hex.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_hash(path: &Path) -> Result<String> {
    Ok(blob_hash(&std::fs::read(path).at(path)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub hash: String,
}

/// Provenance of one command invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileEntry>,
    /// Hash over the config snapshot and every input's hash; two runs with
    /// the same value must produce identical outputs.
    pub input_hash: String,
    pub outputs: Vec<FileEntry>,
    pub timings: BTreeMap<String, f64>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            input_hash: String::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            started: Some(Instant::now()),
        }
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.into(), seed);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let hash = file_hash(path)?;
        self.inputs.push(FileEntry { path: path.to_path_buf(), hash });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let hash = file_hash(path)?;
        self.outputs.push(FileEntry { path: path.to_path_buf(), hash });
        Ok(())
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        self.timings.insert(stage.into(), seconds);
    }

    fn seal(&mut self) {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(self.config.to_string().as_bytes());
        for (k, v) in &self.seeds {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        for f in &self.inputs {
            h.update(f.hash.as_bytes());
        }
        self.input_hash = hex(&h.finalize());
        if let Some(t) = self.started {
            self.timings.insert("total".into(), t.elapsed().as_secs_f64());
        }
    }

    /// Writes `<dir>/<stem>.manifest.json` and returns its path.
    pub fn write(mut self, dir: &Path, stem: &str) -> Result<PathBuf> {
        self.seal();
        std::fs::create_dir_all(dir).at(dir)?;
        let path = dir.join(format!("{stem}.manifest.json"));
        let text = serde_json::to_string_pretty(&self).expect("manifest is plain data");
        std::fs::write(&path, text + "\n").at(&path)?;
        Ok(path)
    }
}
