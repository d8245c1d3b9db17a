//! Output directory with atomic writes and a run manifest.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

pub const RUN_CONFIG: &str = "run_config.json";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Stream a file through SHA-256.
pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let bytes = io::copy(&mut file, &mut hasher)?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
        bytes,
    })
}

pub struct OutDir {
    dir: PathBuf,
    outputs: Vec<FileDigest>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// A path strictly inside the output directory.
    pub fn child(&self, name: &str) -> Result<PathBuf> {
        let p = Path::new(name);
        let plain = p.components().count() == 1
            && matches!(p.components().next(), Some(std::path::Component::Normal(_)));
        if !plain {
            bail!("output name '{name}' must be a plain file name");
        }
        Ok(self.dir.join(p))
    }

    /// Write through a temp file in the same directory, then rename.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.child(name)?;
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target)
            .with_context(|| format!("writing {}", target.display()))?;
        log::info!("wrote {}", target.display());
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Echo the effective configuration and record the manifest.
    pub fn finish(
        mut self,
        command: &str,
        run_config: &serde_json::Value,
        inputs: &[PathBuf],
    ) -> Result<()> {
        let mut config_bytes = serde_json::to_vec_pretty(run_config)?;
        config_bytes.push(b'\n');
        let config_sha256 = hex::encode(Sha256::digest(&config_bytes));
        self.write(RUN_CONFIG, &config_bytes)?;

        let inputs = inputs
            .iter()
            .map(|p| digest_file(p))
            .collect::<Result<Vec<_>>>()?;
        let manifest = serde_json::json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": nutrient_estimate::VERSION,
            "nteb_version": nutrient_estimate::store::VERSION,
            "command": command,
            "created_at": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            "config_sha256": config_sha256,
            "inputs": inputs,
            "outputs": self.outputs,
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let target = self.child(RUN_MANIFEST)?;
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&bytes)?;
        tmp.persist(&target)?;
        Ok(())
    }
}
