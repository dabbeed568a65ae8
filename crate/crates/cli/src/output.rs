use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Output directory plus the list of files written to it.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = BufWriter::new(fs::File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// Writes `manifest.toml`; the timestamp lives only here so other outputs
    /// stay byte-identical across reruns.
    pub fn manifest(&mut self, mode: &str, config: Option<(&Path, &[u8])>, seeds: &[u64]) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'a str,
            version: &'a str,
            mode: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            config: Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            config_sha256: Option<String>,
            seeds: &'a [u64],
            outputs: &'a [String],
            created_unix: u64,
        }
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let m = Manifest {
            tool: "blockreduce",
            version: env!("CARGO_PKG_VERSION"),
            mode,
            config: config.map(|(p, _)| p.display().to_string()),
            config_sha256: config.map(|(_, bytes)| hex::encode(Sha256::digest(bytes))),
            seeds,
            outputs: &self.written,
            created_unix,
        };
        let text = toml::to_string(&m).map_err(|e| CliError::Output(e.to_string()))?;
        fs::write(self.root.join("manifest.toml"), text)?;
        Ok(())
    }
}

/// Reads a config file, returning its parsed form and raw bytes.
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value = toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((value, bytes))
}

pub fn require_config(path: &Option<PathBuf>, mode: &str) -> Result<PathBuf, CliError> {
    path.clone().ok_or_else(|| CliError::Config(format!("{mode} needs --config")))
}
