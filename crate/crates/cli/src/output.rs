use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ConfigError, RunConfig};

/// Writes artifacts into one directory, each prefixed with the header line.
#[derive(Debug, Clone)]
pub struct Artifacts {
    dir: PathBuf,
    header: String,
}

pub fn header_line(cfg: &RunConfig) -> String {
    format!("# convex-flow {} config_sha256={}\n", env!("CARGO_PKG_VERSION"), cfg.hash())
}

impl Artifacts {
    pub fn create(dir: &Path, cfg: &RunConfig) -> Result<Self, ConfigError> {
        Self::with_header(dir, header_line(cfg))
    }

    fn with_header(dir: &Path, header: String) -> Result<Self, ConfigError> {
        fs::create_dir_all(dir)
            .map_err(|e| ConfigError(format!("output directory {} is not writable: {e}", dir.display())))?;
        let meta = fs::metadata(dir).map_err(|e| ConfigError(format!("{}: {e}", dir.display())))?;
        if meta.permissions().readonly() {
            return Err(ConfigError(format!("output directory {} is not writable", dir.display())));
        }
        Ok(Self { dir: dir.to_path_buf(), header })
    }

    pub fn subdir(&self, name: &str) -> Result<Self, ConfigError> {
        Self::with_header(&self.dir.join(name), self.header.clone())
    }

    pub fn write(&self, name: &str, body: &str) -> Result<(), ConfigError> {
        let path = self.dir.join(name);
        let mut text = self.header.clone();
        text.push_str(body);
        fs::write(&path, text).map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))
    }
}
