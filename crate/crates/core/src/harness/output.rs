use std::path::{Path, PathBuf};

use super::ExperimentSpec;
use crate::embednet::NetworkParams;
use crate::error::{Error, Result};

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

/// Output directory of one experiment run. Every file written through it
/// starts with a comment line carrying the format version and spec hash.
#[derive(Clone, Debug)]
pub struct OutputTree {
    dir: PathBuf,
    spec_hash: String,
}

impl OutputTree {
    /// Creates `dir` and writes the spec into it as `spec.toml`.
    pub fn create(dir: &Path, spec: &ExperimentSpec) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tree = Self {
            dir: dir.to_path_buf(),
            spec_hash: spec.hash(),
        };
        tree.write("spec.toml", &spec.to_toml())?;
        Ok(tree)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn spec_hash(&self) -> &str {
        &self.spec_hash
    }

    pub fn header(&self) -> String {
        format!("# cvverify output format {OUTPUT_FORMAT_VERSION}, spec sha256 {}\n", self.spec_hash)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, self.header() + body).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Checkpoints are JSON, so the hash goes into their provenance field.
    pub fn write_model(&self, name: &str, params: &NetworkParams) -> Result<PathBuf> {
        let path = self.path(name);
        let note = format!("cvverify output format {OUTPUT_FORMAT_VERSION}, spec sha256 {}", self.spec_hash);
        std::fs::write(&path, params.to_json_with_provenance(&note)).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
