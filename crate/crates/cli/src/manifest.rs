use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Record of one run; its `config` alone reproduces the outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub engine_version: String,
    pub config: Value,
    pub seeds: BTreeMap<String, Value>,
    pub threads: Option<usize>,
    /// Relative to the output directory.
    pub outputs: Vec<PathBuf>,
    pub timings_ms: BTreeMap<String, f64>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, threads: Option<usize>) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let seeds = config
            .as_object()
            .map(|m| m.iter().filter(|(k, _)| k.contains("seed")).map(|(k, v)| (k.clone(), v.clone())).collect())
            .unwrap_or_default();
        Ok(Self {
            command: command.into(),
            engine_version: env!("CARGO_PKG_VERSION").into(),
            config,
            seeds,
            threads,
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let path = out.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_vec_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }
}

/// Loads a `--config` file: either a flat object of flag values or a run
/// manifest, whose `config` is used if its command matches.
pub fn load_overlay(path: &Path, command: &str) -> Result<Map<String, Value>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    let Value::Object(mut obj) = v else { bail!("{}: config must be a JSON object", path.display()) };
    if let (Some(Value::String(cmd)), Some(_)) = (obj.get("command"), obj.get("config")) {
        if cmd != command {
            bail!("{} is a manifest for `{cmd}`, not `{command}`", path.display());
        }
        let Some(Value::Object(cfg)) = obj.remove("config") else { bail!("manifest config must be an object") };
        return Ok(cfg);
    }
    Ok(obj)
}

/// Replaces every field of `args` that was not given on the command line
/// with the overlay's value.
pub fn apply_overlay<T: Serialize + DeserializeOwned>(args: &T, matches: &ArgMatches, overlay: &Map<String, Value>) -> Result<T> {
    let mut v = serde_json::to_value(args)?;
    let fields = v.as_object_mut().context("arguments are not a struct")?;
    for (k, val) in overlay {
        if !fields.contains_key(k) {
            bail!("unknown config key {k:?}");
        }
        let from_cli = matches!(
            matches.try_get_raw(k).ok().flatten().and(matches.value_source(k)),
            Some(ValueSource::CommandLine)
        );
        if !from_cli {
            fields.insert(k.clone(), val.clone());
        }
    }
    serde_json::from_value(v).context("config values do not fit the command's flags")
}
