//! Run configuration: a TOML file with `seed`, `output_dir`, a `[dataset]`
//! block and optional `[env]`, `[obs]`, `[ppo]` and `[net]` blocks whose
//! defaults are the standard training settings.

use std::fs;
use std::path::{Path, PathBuf};

use roadrl::env::EnvConfig;
use roadrl::obs::ObsConfig;
use roadrl::policy::NetConfig;
use roadrl::ppo::PpoConfig;
use roadrl::scenario::{alter_goals_behind, generate_scenario, load_scenario, GeneratorSpec, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub env: EnvConfig,
    /// Overrides `env.obs` when present.
    #[serde(default, skip_serializing)]
    pub obs: Option<ObsConfig>,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub net: NetSection,
}

/// Network widths. Slot counts always follow the observation config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub embed: usize,
    pub hidden: usize,
}

impl Default for NetSection {
    fn default() -> Self {
        let d = NetConfig::default();
        Self { embed: d.embed, hidden: d.hidden }
    }
}

/// Scenario source: either files/directories, or generator templates used
/// round-robin for `count` scenes with seeds `generator_seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    #[serde(default)]
    pub generator: Vec<GeneratorSpec>,
    #[serde(default)]
    pub count: usize,
    /// Defaults to the run seed.
    #[serde(default)]
    pub generator_seed: Option<u64>,
    /// Reflect every controlled agent's goal to behind its start.
    #[serde(default)]
    pub alter_goals_behind: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        if let Some(obs) = cfg.obs.take() {
            cfg.env.obs = obs;
        }
        cfg.ppo.seed = cfg.seed;
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base_dir.join(&cfg.output_dir);
        }
        for p in &mut cfg.dataset.paths {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.dataset;
        match (d.paths.is_empty(), d.generator.is_empty()) {
            (true, true) => return Err(CliError::config("dataset needs `paths` or at least one `generator`")),
            (false, false) => return Err(CliError::config("dataset takes either `paths` or `generator`, not both")),
            _ => {}
        }
        for p in &d.paths {
            if !p.exists() {
                return Err(CliError::config(format!("dataset path {} does not exist", p.display())));
            }
        }
        if !d.generator.is_empty() && d.count == 0 {
            return Err(CliError::config("dataset.count must be positive when generating"));
        }
        if !(self.env.goal_radius >= 0.0) {
            return Err(CliError::config("env.goal_radius must be non-negative"));
        }
        if self.net.embed == 0 || self.net.hidden == 0 {
            return Err(CliError::config("net.embed and net.hidden must be positive"));
        }
        self.ppo.validate().map_err(CliError::from)
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig { embed: self.net.embed, hidden: self.net.hidden, ..NetConfig::for_obs(&self.env.obs) }
    }

    /// Hex SHA-256 prefix of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        config_hash(json.as_bytes())
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>, CliError> {
        let d = &self.dataset;
        let mut out = if d.generator.is_empty() {
            let mut v = Vec::new();
            for p in &d.paths {
                v.extend(load_scenarios(p)?);
            }
            v
        } else {
            generate_set(&d.generator, d.count, d.generator_seed.unwrap_or(self.seed))?
        };
        if d.alter_goals_behind {
            out = out.iter().map(alter_goals_behind).collect::<Result<_, _>>()?;
        }
        Ok(out)
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    format!("{digest:x}")[..16].to_string()
}

/// Scene `i` uses template `specs[i % len]` and seed `seed + i`.
pub fn generate_set(specs: &[GeneratorSpec], count: usize, seed: u64) -> Result<Vec<Scenario>, CliError> {
    if specs.is_empty() {
        return Err(CliError::config("no generator template given"));
    }
    (0..count)
        .map(|i| generate_scenario(&specs[i % specs.len()], seed.wrapping_add(i as u64)).map_err(CliError::from))
        .collect()
}

/// A single scenario file, or every `*.json` in a directory in name order.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, CliError> {
    if path.is_file() {
        return Ok(vec![load_scenario(path)?]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| io_err(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::data(format!("no scenario files in {}", path.display())));
    }
    files.iter().map(|f| load_scenario(f).map_err(CliError::from)).collect()
}
