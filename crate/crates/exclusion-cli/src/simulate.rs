//! End-to-end ensemble run: simulate replicas, reduce estimators, write the
//! output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use exclusion_core::ensemble::{run_ensemble, run_second_class_ensemble, SimParams};
use exclusion_core::estimators::{
    definition_window, diffusivity_from_two_point, estimate_two_point, green_kubo_diffusivity,
    height_variance_diffusivity, second_class_statistics, sum_rule_residuals, EstimatorTag,
    SecondClassStats, TwoPointEstimate,
};
use exclusion_core::rng::derived_seed;

use crate::config::{resolve_workers, ExperimentConfig};
use crate::io::{
    write_diffusivity, write_height_variance, write_second_class_hist, write_sum_rules,
    write_two_point, DiffusivityRow, HeightRow,
};
use crate::manifest::RunManifest;
use crate::CliError;

/// Seed-stream tag separating the coupled-walker ensemble from the plain one.
const SECOND_CLASS_SEED_TAG: u64 = 0x5ec0_dc1a_55ed_0001;

pub struct SimulateReport {
    pub out_dir: PathBuf,
    pub rows_written: usize,
    /// Times at which an estimator declined to produce a value, with reasons.
    pub skipped: Vec<String>,
}

pub fn cmd_simulate(
    config: &ExperimentConfig,
    seed_flag: Option<u64>,
    workers_flag: Option<usize>,
    out_flag: Option<PathBuf>,
) -> Result<SimulateReport, CliError> {
    let params = config.validated(seed_flag)?;
    let workers = resolve_workers(workers_flag, config.workers)?;
    let out_dir = out_flag
        .or_else(|| config.out_dir.clone())
        .ok_or(CliError::MissingOutDir)?;
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let started = Instant::now();
    let mut manifest = RunManifest::new(config, params.master_seed, workers);
    let mut skipped = Vec::new();
    let mut rows_written = 0usize;
    let mut diffusivity_rows: Vec<DiffusivityRow> = Vec::new();

    let obs = config.observables;
    let need_main = obs.two_point || obs.current || obs.height;
    if need_main {
        let traces = run_ensemble(&params, workers);
        for t in &traces {
            manifest.total_attempts += t.attempts;
            manifest.total_accepted += t.accepted;
        }

        if obs.two_point {
            let mut estimates: Vec<TwoPointEstimate> = Vec::new();
            let mut sum_rows = Vec::new();
            for &t in params.grid.points() {
                let est = estimate_two_point(&traces, t, params.rho)
                    .map_err(|e| CliError::Estimator(e.to_string()))?;
                let residuals = sum_rule_residuals(&est, &params.law, params.rho);
                sum_rows.push((t, residuals, est.max_identity_deviation));
                match diffusivity_from_two_point(&est, &params.law, params.rho) {
                    Ok((d, se)) => diffusivity_rows.push(DiffusivityRow {
                        t,
                        estimator_tag: EstimatorTag::Definition.as_str().to_string(),
                        d,
                        stderr: se,
                    }),
                    Err(e) => skipped.push(format!("definition at t={t}: {e}")),
                }
                estimates.push(est);
            }
            write_two_point(&out_dir, &estimates)?;
            write_sum_rules(&out_dir, &sum_rows)?;
            rows_written += estimates.len() * params.sites + sum_rows.len();
        }

        if obs.current {
            for &t in params.grid.points() {
                match green_kubo_diffusivity(&traces, t, &params.law, params.rho) {
                    Ok((d, se)) => diffusivity_rows.push(DiffusivityRow {
                        t,
                        estimator_tag: EstimatorTag::GreenKubo.as_str().to_string(),
                        d,
                        stderr: se,
                    }),
                    Err(e) => skipped.push(format!("green_kubo at t={t}: {e}")),
                }
            }
        }

        if obs.height {
            let mut height_rows = Vec::new();
            for &t in params.grid.points() {
                let window = definition_window(&params.law, t);
                match height_variance_diffusivity(&traces, t, &params.law, params.rho, window) {
                    Ok((d, se)) => {
                        diffusivity_rows.push(DiffusivityRow {
                            t,
                            estimator_tag: EstimatorTag::Height.as_str().to_string(),
                            d,
                            stderr: se,
                        });
                        height_rows.push(HeightRow {
                            t,
                            window,
                            d,
                            stderr: se,
                        });
                    }
                    Err(e) => skipped.push(format!("height at t={t}: {e}")),
                }
            }
            write_height_variance(&out_dir, &height_rows)?;
            rows_written += height_rows.len();
        }
    }

    if obs.second_class {
        let mut sc_params = params.clone();
        sc_params.master_seed = derived_seed(params.master_seed, SECOND_CLASS_SEED_TAG);
        let traces = run_second_class_ensemble(&sc_params, workers);
        for t in &traces {
            manifest.total_attempts += t.attempts;
        }
        let mut stats_rows: Vec<SecondClassStats> = Vec::new();
        for &t in params.grid.points() {
            match second_class_statistics(&traces, t, &params.law, params.rho) {
                Ok(stats) => {
                    diffusivity_rows.push(DiffusivityRow {
                        t,
                        estimator_tag: EstimatorTag::SecondClass.as_str().to_string(),
                        d: stats.d_value,
                        stderr: stats.d_stderr,
                    });
                    stats_rows.push(stats);
                }
                Err(e) => skipped.push(format!("second_class at t={t}: {e}")),
            }
        }
        write_second_class_hist(&out_dir, &stats_rows)?;
        rows_written += stats_rows.len() * params.sites;
    }

    // Fixed serialization order: by estimator tag, then time, so output bytes
    // never depend on the order estimators ran above.
    diffusivity_rows.sort_by(|a, b| {
        (a.estimator_tag.as_str(), a.t)
            .partial_cmp(&(b.estimator_tag.as_str(), b.t))
            .unwrap()
    });
    write_diffusivity(&out_dir, &diffusivity_rows)?;
    rows_written += diffusivity_rows.len();

    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest
        .write(&out_dir)
        .map_err(|source| CliError::Io {
            path: out_dir.join("manifest.json"),
            source,
        })?;

    Ok(SimulateReport {
        out_dir,
        rows_written,
        skipped,
    })
}

/// Lists the data files a simulate run may produce, for byte comparisons.
pub fn data_files(dir: &Path) -> Vec<PathBuf> {
    [
        "two_point.csv",
        "diffusivity.csv",
        "sum_rules.csv",
        "second_class_hist.csv",
        "height_variance.csv",
    ]
    .iter()
    .map(|n| dir.join(n))
    .filter(|p| p.exists())
    .collect()
}
