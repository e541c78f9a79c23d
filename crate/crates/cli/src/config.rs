//! Scenario configuration: a small TOML file plus `key=value` overrides.
//!
//! ```toml
//! [scenario]
//! name = "r4_prts"
//! seed = 7
//! out = "runs/r4_prts"
//!
//! [params]
//! T_target = 0.5
//!
//! [sim]
//! dt_max = 1e-4
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bilstab::SimOptions;
use serde::Deserialize;

use crate::error::{io_err, CliError, CliResult};
use crate::scenarios::{self, canonical_key, Params, ScenarioInfo};

pub const SIM_KEYS: &[&str] = &[
    "dt_max",
    "horizon",
    "eps_ext",
    "record_stride",
    "weak_functionals",
    "courant_cap",
];

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub params: Params,
    pub sim: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: ScenarioSection,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    sim: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    name: String,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed: DEFAULT_SEED,
            out: None,
            params: Params::new(),
            sim: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = Self::new(&file.scenario.name);
        cfg.seed = file.scenario.seed.unwrap_or(DEFAULT_SEED);
        cfg.out = file.scenario.out;
        for (k, v) in file.params {
            cfg.set_param(&k, v)?;
        }
        for (k, v) in file.sim {
            cfg.set_sim(&k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn info(&self) -> CliResult<&'static ScenarioInfo> {
        scenarios::lookup(&self.scenario)
    }

    pub fn set_param(&mut self, key: &str, value: f64) -> CliResult<()> {
        let info = self.info()?;
        let key = canonical_key(key);
        if !info.params.iter().any(|d| d.key == key) {
            return Err(scenarios::unknown_key(info, key));
        }
        self.params.insert(key.to_string(), value);
        Ok(())
    }

    pub fn set_sim(&mut self, key: &str, value: f64) -> CliResult<()> {
        if !SIM_KEYS.contains(&key) {
            return Err(CliError::Validation {
                field: format!("sim.{key}"),
                reason: format!("unknown option; expected one of: {}", SIM_KEYS.join(", ")),
            });
        }
        self.sim.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies `key=value`. The key may be qualified (`params.mu`, `sim.horizon`);
    /// a bare key is looked up among the scenario parameters, then the sim options.
    pub fn apply_override(&mut self, assignment: &str) -> CliResult<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| CliError::Validation {
            field: assignment.to_string(),
            reason: "expected key=value".into(),
        })?;
        let key = key.trim();
        let value: f64 = value.trim().parse().map_err(|_| CliError::Validation {
            field: key.to_string(),
            reason: format!("`{}` is not a number", value.trim()),
        })?;
        if let Some(k) = key.strip_prefix("sim.") {
            return self.set_sim(k, value);
        }
        if let Some(k) = key.strip_prefix("params.") {
            return self.set_param(k, value);
        }
        let info = self.info()?;
        if info.params.iter().any(|d| d.key == canonical_key(key)) {
            self.set_param(key, value)
        } else if SIM_KEYS.contains(&key) {
            self.set_sim(key, value)
        } else {
            Err(scenarios::unknown_key(info, key))
        }
    }

    /// Scenario defaults with the configured overrides applied.
    pub fn sim_options(&self, defaults: SimOptions) -> CliResult<SimOptions> {
        let mut o = defaults;
        for (k, v) in &self.sim {
            let as_count = |field: &str| -> CliResult<usize> {
                if *v < 0.0 || v.fract() != 0.0 {
                    return Err(CliError::Validation {
                        field: format!("sim.{field}"),
                        reason: format!("must be a non-negative integer, got {v}"),
                    });
                }
                Ok(*v as usize)
            };
            match k.as_str() {
                "dt_max" => o.dt_max = *v,
                "horizon" => o.horizon = *v,
                "eps_ext" => o.eps_ext = *v,
                "courant_cap" => o.courant_cap = *v,
                "record_stride" => o.record_stride = as_count("record_stride")?,
                "weak_functionals" => o.weak_functionals = as_count("weak_functionals")?,
                _ => unreachable!("keys are checked on insertion"),
            }
        }
        o.validate()?;
        Ok(o)
    }
}
