//! Run manifest: everything needed to regenerate an output directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use exclusion_core::rng::replica_words;

pub const SEED_RULE: &str = "pcg64-splitmix64-v1";

/// Written next to every output set. The config snapshot plus the seed rule
/// pin every replica stream, so the data files can be regenerated bit for bit
/// from this document alone.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub code_version: String,
    /// Snapshot of the config as executed (seed overrides already applied).
    pub config: ExperimentConfig,
    /// Identifier of the replica-seed derivation; replica streams follow
    /// from (master_seed, replica_id) under this rule.
    pub seed_rule: String,
    /// First derived seed words, as a spot check that a rebuild derives the
    /// same streams.
    pub replica_seed_sample: Vec<[u64; 4]>,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub total_attempts: u64,
    pub total_accepted: u64,
    /// Set when the config allowed a ring smaller than the correlation cone.
    pub wrap_override_active: bool,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, master_seed: u64, workers: usize) -> Self {
        let sample = (0..config.replicas.min(4))
            .map(|r| replica_words(master_seed, r))
            .collect();
        let needed = config
            .jump_law()
            .map(|law| law.min_sites(config.t_max))
            .unwrap_or(0);
        let mut snapshot = config.clone();
        snapshot.master_seed = master_seed;
        RunManifest {
            format_version: 1,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: snapshot,
            seed_rule: SEED_RULE.to_string(),
            replica_seed_sample: sample,
            workers,
            wall_clock_seconds: 0.0,
            total_attempts: 0,
            total_accepted: 0,
            wrap_override_active: config.allow_wrap && config.sites < needed,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")
    }

    pub fn read(dir: &Path) -> Result<Self, crate::config::ConfigError> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|source| {
            crate::config::ConfigError::Io {
                path: path.clone(),
                source,
            }
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fields that must match when the same config is rerun; timing and
    /// worker count legitimately differ.
    pub fn reproducible_eq(&self, other: &Self) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.wall_clock_seconds = 0.0;
        b.wall_clock_seconds = 0.0;
        a.workers = 0;
        b.workers = 0;
        a.config.workers = None;
        b.config.workers = None;
        a == b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
              "law": {"1": 1.0},
              "rho": 0.5,
              "sites": 64,
              "t_max": 1.0,
              "grid": {"t0": 0.5, "ratio": 2.0},
              "replicas": 8,
              "master_seed": 9
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn manifest_round_trips_through_disk() {
        let dir = std::env::temp_dir().join(format!("manifest-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = RunManifest::new(&config(), 9, 2);
        m.total_attempts = 123;
        m.write(&dir).unwrap();
        let back = RunManifest::read(&dir).unwrap();
        assert_eq!(m, back);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn reproducible_comparison_ignores_timing_and_workers() {
        let mut a = RunManifest::new(&config(), 9, 1);
        let mut b = RunManifest::new(&config(), 9, 8);
        a.wall_clock_seconds = 1.0;
        b.wall_clock_seconds = 2.0;
        assert!(a.reproducible_eq(&b));
        b.total_attempts = 1;
        assert!(!a.reproducible_eq(&b));
    }

    #[test]
    fn seed_sample_tracks_the_master_seed() {
        let a = RunManifest::new(&config(), 9, 1);
        let b = RunManifest::new(&config(), 10, 1);
        assert_ne!(a.replica_seed_sample, b.replica_seed_sample);
        assert_eq!(a.replica_seed_sample.len(), 4);
    }
}
