use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of one run, written last into the output directory.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub name: String,
    /// "ok" or "error".
    pub status: String,
    pub error: Option<String>,
    pub version: String,
    pub wall_time_s: f64,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// Output file name to byte length.
    pub files: BTreeMap<String, u64>,
    pub results: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

/// Writes outputs into one directory and records their sizes.
pub struct OutputDir {
    pub dir: PathBuf,
    pub files: BTreeMap<String, u64>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> io::Result<()> {
        let bytes = bytes.as_ref();
        fs::write(self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), bytes.len() as u64);
        Ok(())
    }
}
