//! Run configuration shared by the command-line subcommands.
//!
//! Sources, lowest precedence first: built-in defaults, `CAMDP_*`
//! environment variables, the TOML config file, command-line flags.
//! Environment keys map onto TOML paths with `__` between levels, e.g.
//! `CAMDP_TRAIN__ITERATIONS=100` or `CAMDP_EPISODE__ETA=0.5`; values are
//! parsed as TOML and fall back to plain strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::cdm::IngestConfig;
use crate::error::{Error, Result};
use crate::eval::AblationSpec;
use crate::policy::TrainConfig;
use crate::seed;
use crate::simenv::EpisodeConfig;

pub const ENV_PREFIX: &str = "CAMDP_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Size of the synthetic evaluation set when no events file is given.
    pub events: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { events: 1000 }
    }
}

/// Episode source of training and ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Simulated from the noise model.
    #[default]
    Synthetic,
    /// Recorded series of the dataset, replayed.
    Historical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; every component draws from a named sub-stream of it.
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub source: SourceKind,
    /// Kelvins-layout CDM file for fitting, historical training and
    /// evaluation.
    pub dataset: Option<PathBuf>,
    /// Fitted noise model; the built-in reference model when absent.
    pub noise_model: Option<PathBuf>,
    pub ingest: IngestConfig,
    pub episode: EpisodeConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub ablation: AblationSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            source: SourceKind::Synthetic,
            dataset: None,
            noise_model: None,
            ingest: IngestConfig::default(),
            episode: EpisodeConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            ablation: AblationSpec::default(),
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with environment variables, then the file.
    pub fn resolve<I>(file: Option<&Path>, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = env_table(env)?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let file_table: Table =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            merge(&mut table, file_table);
        }
        let cfg: RunConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.episode.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.eval.events == 0 {
            return Err(Error::Config("eval.events must be positive".into()));
        }
        Ok(())
    }

    /// Seed of the named component sub-stream.
    pub fn stream(&self, name: &str) -> u64 {
        seed::substream(self.seed, name)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// fnv1a64 of the serialized configuration.
    pub fn hash(&self) -> u64 {
        seed::fnv1a64(self.to_toml_string().as_bytes())
    }
}

fn env_table<I>(env: I) -> Result<Table>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    let mut table = Table::new();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(Error::Config(format!("malformed environment key {key}")));
        }
        let value = toml::from_str::<Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(Value::String(raw));
        let (last, parents) = path.split_last().expect("non-empty path");
        let mut node = &mut table;
        for p in parents {
            let entry = node.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
            node = match entry {
                Value::Table(t) => t,
                _ => return Err(Error::Config(format!("environment key {key} nests under a value"))),
            };
        }
        node.insert(last.clone(), value);
    }
    Ok(table)
}

/// Recursively overlays `top` onto `base`; tagged-enum tables are replaced
/// whole so a `mode` change does not inherit stale fields.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) if !t.contains_key("mode") => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
