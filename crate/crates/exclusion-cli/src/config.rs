//! JSON experiment configuration: strict parsing, validation, and conversion
//! into core simulation parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use exclusion_core::ensemble::SimParams;
use exclusion_core::grid::TimeGrid;
use exclusion_core::law::{law_from_pairs, JumpLaw};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("law offset {0:?} is not a signed integer")]
    BadOffset(String),
    #[error("invalid jump law: {0}")]
    BadLaw(#[from] exclusion_core::law::LawError),
    #[error("invalid time grid: {0}")]
    BadGrid(#[from] exclusion_core::grid::GridError),
    #[error("rho must lie strictly between 0 and 1, got {0}")]
    BadDensity(f64),
    #[error("replicas must be at least 1")]
    NoReplicas,
    #[error("the height observable requires the unit forward-jump law")]
    HeightNeedsTasep,
    #[error(
        "sites = {sites} cannot contain the correlation cone up to t_max = {t_max} \
         (needs at least {needed}); set allow_wrap to override"
    )]
    LightCone {
        sites: usize,
        t_max: f64,
        needed: usize,
    },
    #[error("workers must be a positive integer or \"auto\"")]
    BadWorkers,
    #[error("lambda_grid entries must be positive and finite")]
    BadLambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workers {
    Auto,
    Count(usize),
}

impl Serialize for Workers {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Workers::Auto => s.serialize_str("auto"),
            Workers::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Workers {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Workers;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or the string \"auto\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Workers, E> {
                if v == 0 {
                    return Err(E::custom("workers must be positive"));
                }
                Ok(Workers::Count(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Workers, E> {
                if v <= 0 {
                    return Err(E::custom("workers must be positive"));
                }
                Ok(Workers::Count(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Workers, E> {
                if v == "auto" {
                    Ok(Workers::Auto)
                } else {
                    Err(E::custom("the only accepted worker string is \"auto\""))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observables {
    #[serde(default = "default_true")]
    pub two_point: bool,
    #[serde(default = "default_true")]
    pub current: bool,
    #[serde(default)]
    pub second_class: bool,
    #[serde(default)]
    pub height: bool,
}

fn default_true() -> bool {
    true
}

impl Default for Observables {
    fn default() -> Self {
        Observables {
            two_point: true,
            current: true,
            second_class: false,
            height: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t0: f64,
    pub ratio: f64,
}

/// One experiment: jump law, density, ring size, replica budget, time grid,
/// observable toggles, and output destination. Unknown keys are rejected so a
/// typo in a physics parameter fails fast instead of running silently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Jump weights keyed by signed offset, e.g. {"1": 0.75, "-1": 0.25}.
    pub law: BTreeMap<String, f64>,
    pub rho: f64,
    pub sites: usize,
    pub t_max: f64,
    pub grid: GridSpec,
    pub replicas: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub observables: Observables,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<Workers>,
    /// Record runs whose ring is too small for the correlation cone instead
    /// of refusing them. Recorded in the manifest when set.
    #[serde(default)]
    pub allow_wrap: bool,
    /// Resolvent evaluation points for the oracle subcommand.
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn jump_law(&self) -> Result<JumpLaw, ConfigError> {
        let mut pairs = Vec::with_capacity(self.law.len());
        for (key, &w) in &self.law {
            let z: i64 = key
                .trim()
                .parse()
                .map_err(|_| ConfigError::BadOffset(key.clone()))?;
            pairs.push((z, w));
        }
        Ok(law_from_pairs(&pairs)?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ConfigError> {
        Ok(TimeGrid::new(self.grid.t0, self.grid.ratio, self.t_max)?)
    }

    /// Full validation; returns the derived core parameters.
    pub fn validated(&self, seed_override: Option<u64>) -> Result<SimParams, ConfigError> {
        let law = self.jump_law()?;
        let grid = self.time_grid()?;
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(ConfigError::BadDensity(self.rho));
        }
        if self.replicas == 0 {
            return Err(ConfigError::NoReplicas);
        }
        if self.observables.height && !law.is_unit_tasep() {
            return Err(ConfigError::HeightNeedsTasep);
        }
        let needed = law.min_sites(self.t_max);
        if self.sites < needed && !self.allow_wrap {
            return Err(ConfigError::LightCone {
                sites: self.sites,
                t_max: self.t_max,
                needed,
            });
        }
        if let Some(ls) = &self.lambda_grid {
            if ls.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(ConfigError::BadLambda);
            }
        }
        Ok(SimParams {
            law,
            rho: self.rho,
            sites: self.sites,
            grid,
            replicas: self.replicas,
            master_seed: seed_override.unwrap_or(self.master_seed),
        })
    }
}

/// Worker-count resolution order: command-line flag, then config file, then
/// the EXCLUSION_LAB_WORKERS environment variable, then auto-detection.
pub fn resolve_workers(flag: Option<usize>, config: Option<Workers>) -> Result<usize, ConfigError> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(ConfigError::BadWorkers);
        }
        return Ok(n);
    }
    match config {
        Some(Workers::Count(n)) => Ok(n),
        Some(Workers::Auto) => Ok(detected()),
        None => match std::env::var("EXCLUSION_LAB_WORKERS") {
            Ok(s) => match s.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(ConfigError::BadWorkers),
            },
            Err(_) => Ok(detected()),
        },
    }
}

fn detected() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
