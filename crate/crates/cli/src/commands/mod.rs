pub mod diff;
pub mod forecast;
pub mod score;
pub mod simulate;
pub mod trend;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use respicast::config::RunConfig;

use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

/// A parsed run configuration together with its canonical text, which is what the manifest hashes.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: Option<PathBuf>,
}

impl LoadedConfig {
    /// Manifest seeded with the config hash and, when one was given, the config file.
    pub fn manifest(&self, command: &str, seed: u64) -> CliResult<Manifest> {
        let mut m = Manifest::new(command, seed, &self.config.to_toml_string()?);
        if let Some(path) = &self.source {
            m.input("config", path)?;
        }
        Ok(m)
    }
}

pub fn load_config(path: Option<&Path>) -> CliResult<LoadedConfig> {
    let config = match path {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    Ok(LoadedConfig { config, source: path.map(Path::to_path_buf) })
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}
