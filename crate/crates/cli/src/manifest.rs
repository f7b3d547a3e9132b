use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use cpt_core::templates::PromptTemplates;
use cpt_core::RunConfig;

use crate::exit::Failure;

/// Everything needed to replay a command.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub parallel_feature: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_toml: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub template_hashes: BTreeMap<&'static str, String>,
    /// SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(subcommand: &str, argv: &[String], templates: &PromptTemplates) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            argv: argv.to_vec(),
            parallel_feature: cfg!(feature = "parallel"),
            config: None,
            config_toml: None,
            seed: None,
            template_hashes: templates.hashes(),
            inputs: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_config(mut self, config: &RunConfig) -> Self {
        self.seed = Some(config.seed);
        self.config_toml = Some(config.to_toml_string());
        self.config = Some(config.clone());
        self
    }

    /// Record the hash of `path`; directories hash each file inside, sorted.
    pub fn input(&mut self, path: &Path) -> Result<(), Failure> {
        let mut files: Vec<PathBuf> = if path.is_dir() {
            std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect()
        } else {
            vec![path.to_path_buf()]
        };
        files.sort();
        for f in files {
            let bytes = std::fs::read(&f).map_err(|e| Failure::Io(format!("{}: {e}", f.display())))?;
            self.inputs.insert(f.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
