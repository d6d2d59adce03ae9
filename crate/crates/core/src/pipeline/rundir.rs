use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<ManifestEntry>,
}

/// Run directory that records every file it writes, per stage.
pub struct RunDir {
    root: PathBuf,
    stages: Vec<StageRecord>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::from(e).context(&root.display().to_string()))?;
        Ok(RunDir { root: root.to_path_buf(), stages: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Opens a new stage; later writes are attributed to it.
    pub fn stage(&mut self, name: &str, inputs: &[&str]) {
        self.stages.push(StageRecord {
            stage: name.to_string(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: Vec::new(),
        });
    }

    pub fn write_with<F>(&mut self, rel: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let ctx = path.display().to_string();
        let file = File::create(&path).map_err(|e| Error::from(e).context(&ctx))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::from(e).context(&ctx))?;
        drop(w);
        let bytes = fs::read(&path)?;
        let entry = ManifestEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        };
        match self.stages.last_mut() {
            Some(s) => s.outputs.push(entry),
            None => return Err(Error::Invariant(format!("{rel} written outside a stage"))),
        }
        Ok(path)
    }

    pub fn write_str(&mut self, rel: &str, text: &str) -> Result<PathBuf> {
        self.write_with(rel, |w| Ok(w.write_all(text.as_bytes())?))
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Invariant(e.to_string()))?;
        text.push('\n');
        self.write_str(rel, &text)
    }

    pub fn stages(&self) -> &[StageRecord] {
        &self.stages
    }

    /// Writes `manifest.json` listing every stage's inputs and hashed outputs.
    pub fn finish(mut self) -> Result<Vec<StageRecord>> {
        let stages = self.stages.clone();
        self.stage("manifest", &[]);
        #[derive(Serialize)]
        struct Manifest<'a> {
            stages: &'a [StageRecord],
        }
        let mut text =
            serde_json::to_string_pretty(&Manifest { stages: &stages }).map_err(|e| Error::Invariant(e.to_string()))?;
        text.push('\n');
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(stages)
    }
}
