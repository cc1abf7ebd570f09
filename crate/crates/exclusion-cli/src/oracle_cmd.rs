//! Exact small-ring reference values, written as versioned golden files.

use std::path::{Path, PathBuf};

use exclusion_core::law::JumpLaw;
use exclusion_core::oracle::{OracleModel, OracleError};
use exclusion_core::ring::centered_site;

use crate::config::ExperimentConfig;
use crate::io::{write_golden, GoldenRow};
use crate::CliError;

pub const GOLDEN_VERSION: &str = "v1";
const DEFAULT_LAMBDAS: [f64; 4] = [1.0, 0.5, 0.1, 1e4];

/// Computes every exact quantity the validation suite consumes for one model.
pub fn golden_rows(
    law: &JumpLaw,
    sites: usize,
    rho: f64,
    t_grid: &[f64],
    lambda_grid: &[f64],
) -> Result<Vec<GoldenRow>, OracleError> {
    let model = OracleModel::new(sites, law, rho)?;
    // Commas in the law id would collide with the column separator.
    let law_id = law.id_string().replace(',', ";");
    let row = |key: f64, quantity: String, value: f64| GoldenRow {
        law_id: law_id.clone(),
        sites,
        rho,
        key,
        quantity,
        value,
    };

    let mut rows = Vec::new();
    for &t in t_grid {
        let s = model.exact_two_point(t);
        for x in 0..sites {
            let xc = centered_site(x, sites);
            rows.push(row(t, format!("two_point:x={xc}"), s[x]));
        }
        match model.exact_diffusivity(t) {
            Ok(d) => rows.push(row(t, "diffusivity".into(), d)),
            Err(OracleError::WrapDominated { .. }) => {}
            Err(e) => return Err(e),
        }
        rows.push(row(
            t,
            "integrated_current_norm".into(),
            model.exact_integrated_current_norm(t)?,
        ));
    }
    for l in model.check_lemma21(t_grid)? {
        rows.push(row(l.t, "lemma_lhs".into(), l.lhs));
        rows.push(row(l.t, "lemma_rhs".into(), l.rhs));
    }
    for &lambda in lambda_grid {
        rows.push(row(
            lambda,
            "h1_norm_sq".into(),
            model.exact_h1_norm_squared(lambda)?,
        ));
    }
    Ok(rows)
}

pub struct OracleReport {
    pub path: PathBuf,
    pub rows: usize,
}

pub fn cmd_oracle(
    config: &ExperimentConfig,
    out_flag: Option<PathBuf>,
) -> Result<OracleReport, CliError> {
    let law = config.jump_law()?;
    let grid = config.time_grid()?;
    let lambdas: Vec<f64> = config
        .lambda_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_LAMBDAS.to_vec());
    let out_dir = out_flag
        .or_else(|| config.out_dir.clone())
        .ok_or(CliError::MissingOutDir)?
        .join(GOLDEN_VERSION);
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let rows = golden_rows(&law, config.sites, config.rho, grid.points(), &lambdas)
        .map_err(|e| CliError::Oracle(e.to_string()))?;
    let path = out_dir.join("oracle.csv");
    write_golden(&path, &rows)?;
    Ok(OracleReport {
        path,
        rows: rows.len(),
    })
}

/// Location of the golden file committed with the sources.
pub fn committed_golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("golden")
        .join(GOLDEN_VERSION)
        .join("oracle.csv")
}
