//! Output file formats. Floats are written with Rust's shortest round-trip
//! representation, so identical data always produces identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use exclusion_core::estimators::{SecondClassStats, SumRuleResiduals, TwoPointEstimate};
use exclusion_core::ring::centered_site;
use exclusion_core::scaling::{LaplaceProfile, PowerLawFit};

use crate::CliError;

/// One diffusivity value from one estimation route.
#[derive(Debug, Clone)]
pub struct DiffusivityRow {
    pub t: f64,
    pub estimator_tag: String,
    pub d: f64,
    pub stderr: f64,
}

/// One height-route value with its spatial window.
#[derive(Debug, Clone)]
pub struct HeightRow {
    pub t: f64,
    pub window: usize,
    pub d: f64,
    pub stderr: f64,
}

/// Flat fit record for fits.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub estimator_tag: String,
    pub window: (f64, f64),
    pub exponent: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
}

impl FitRecord {
    pub fn from_fit(tag: &str, fit: &PowerLawFit) -> Self {
        FitRecord {
            estimator_tag: tag.to_string(),
            window: fit.window,
            exponent: fit.exponent,
            ci_lo: fit.exponent_ci.0,
            ci_hi: fit.exponent_ci.1,
            amplitude: fit.amplitude,
            residual_rms: fit.residual_rms,
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// two_point.csv: t, x, s, stderr with x running over centered sites.
pub fn write_two_point(dir: &Path, estimates: &[TwoPointEstimate]) -> Result<(), CliError> {
    let mut text = String::from("t,x,s,stderr\n");
    for est in estimates {
        let l = est.sites as i64;
        for xc in (-(l / 2) + 1)..=(l / 2) {
            let shift = xc.rem_euclid(l) as usize;
            let _ = writeln!(
                text,
                "{},{},{},{}",
                est.t, xc, est.s_values[shift], est.stderr[shift]
            );
        }
    }
    write_file(&dir.join("two_point.csv"), &text)
}

/// diffusivity.csv: t, estimator_tag, d, stderr.
pub fn write_diffusivity(dir: &Path, rows: &[DiffusivityRow]) -> Result<(), CliError> {
    let mut text = String::from("t,estimator_tag,d,stderr\n");
    for r in rows {
        let _ = writeln!(text, "{},{},{},{}", r.t, r.estimator_tag, r.d, r.stderr);
    }
    write_file(&dir.join("diffusivity.csv"), &text)
}

/// sum_rules.csv: per-time residuals of the two conservation statements plus
/// the worst per-replica deviation from the exact identity.
pub fn write_sum_rules(
    dir: &Path,
    rows: &[(f64, SumRuleResiduals, f64)],
) -> Result<(), CliError> {
    let mut text = String::from(
        "t,zeroth_residual,zeroth_stderr,first_residual,first_stderr,max_identity_deviation\n",
    );
    for (t, r, max_dev) in rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            t, r.zeroth, r.zeroth_stderr, r.first, r.first_stderr, max_dev
        );
    }
    write_file(&dir.join("sum_rules.csv"), &text)
}

/// second_class_hist.csv: t, x, probability (x centered).
pub fn write_second_class_hist(dir: &Path, stats: &[SecondClassStats]) -> Result<(), CliError> {
    let mut text = String::from("t,x,probability\n");
    for s in stats {
        let l = s.histogram.len() as i64;
        for xc in (-(l / 2) + 1)..=(l / 2) {
            let shift = xc.rem_euclid(l) as usize;
            let _ = writeln!(text, "{},{},{}", s.t, xc, s.histogram[shift]);
        }
    }
    write_file(&dir.join("second_class_hist.csv"), &text)
}

/// height_variance.csv: t, window, d, stderr.
pub fn write_height_variance(dir: &Path, rows: &[HeightRow]) -> Result<(), CliError> {
    let mut text = String::from("t,window,d,stderr\n");
    for r in rows {
        let _ = writeln!(text, "{},{},{},{}", r.t, r.window, r.d, r.stderr);
    }
    write_file(&dir.join("height_variance.csv"), &text)
}

/// laplace_profile.csv: lambda, value, tail_fraction.
pub fn write_laplace_profile(path: &Path, profile: &LaplaceProfile) -> Result<(), CliError> {
    let mut text = String::from("lambda,value,tail_fraction\n");
    for i in 0..profile.lambdas.len() {
        let _ = writeln!(
            text,
            "{},{},{}",
            profile.lambdas[i], profile.values[i], profile.tail_fraction[i]
        );
    }
    write_file(path, &text)
}

pub fn write_fits(path: &Path, records: &[FitRecord]) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(records).expect("fit records serialize");
    write_file(path, &(text + "\n"))
}

fn parse_f64(field: &str, path: &Path, line_no: usize) -> Result<f64, CliError> {
    field.parse().map_err(|_| CliError::BadData {
        path: path.to_path_buf(),
        detail: format!("line {line_no}: bad float {field:?}"),
    })
}

/// Reads diffusivity.csv back into (t, d, stderr) rows per estimator tag,
/// preserving row order.
pub fn read_diffusivity(dir: &Path) -> Result<Vec<(String, Vec<(f64, f64, f64)>)>, CliError> {
    let path = dir.join("diffusivity.csv");
    let text = read_file(&path)?;
    let mut series: Vec<(String, Vec<(f64, f64, f64)>)> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(CliError::BadData {
                path,
                detail: format!("line {}: expected 4 columns", i + 1),
            });
        }
        let t = parse_f64(parts[0], &path, i + 1)?;
        let d = parse_f64(parts[2], &path, i + 1)?;
        let se = parse_f64(parts[3], &path, i + 1)?;
        let tag = parts[1];
        match series.iter_mut().find(|(name, _)| name == tag) {
            Some((_, rows)) => rows.push((t, d, se)),
            None => series.push((tag.to_string(), vec![(t, d, se)])),
        }
    }
    Ok(series)
}

/// Reads two_point.csv back into per-time profiles: (t, centered xs, s, stderr).
#[allow(clippy::type_complexity)]
pub fn read_two_point(dir: &Path) -> Result<Vec<(f64, Vec<i64>, Vec<f64>, Vec<f64>)>, CliError> {
    let path = dir.join("two_point.csv");
    let text = read_file(&path)?;
    let mut profiles: Vec<(f64, Vec<i64>, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(CliError::BadData {
                path,
                detail: format!("line {}: expected 4 columns", i + 1),
            });
        }
        let t = parse_f64(parts[0], &path, i + 1)?;
        let x: i64 = parts[1].parse().map_err(|_| CliError::BadData {
            path: path.clone(),
            detail: format!("line {}: bad site index {:?}", i + 1, parts[1]),
        })?;
        let s = parse_f64(parts[2], &path, i + 1)?;
        let se = parse_f64(parts[3], &path, i + 1)?;
        match profiles.last_mut() {
            Some((pt, xs, ss, ses)) if *pt == t => {
                xs.push(x);
                ss.push(s);
                ses.push(se);
            }
            _ => profiles.push((t, vec![x], vec![s], vec![se])),
        }
    }
    Ok(profiles)
}

/// Rebuilds per-shift arrays from a centered profile.
pub fn profile_to_shift_order(xs: &[i64], values: &[f64]) -> Vec<f64> {
    let l = xs.len() as i64;
    let mut out = vec![0.0; xs.len()];
    for (&xc, &v) in xs.iter().zip(values) {
        out[xc.rem_euclid(l) as usize] = v;
    }
    out
}

/// Golden oracle rows: law_id, sites, rho, key, quantity, value.
pub fn write_golden(path: &Path, rows: &[GoldenRow]) -> Result<(), CliError> {
    let mut text = String::from("law_id,sites,rho,key,quantity,value\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            r.law_id, r.sites, r.rho, r.key, r.quantity, r.value
        );
    }
    write_file(path, &text)
}

pub fn read_golden(path: &Path) -> Result<Vec<GoldenRow>, CliError> {
    let text = read_file(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(CliError::BadData {
                path: path.to_path_buf(),
                detail: format!("line {}: expected 6 columns", i + 1),
            });
        }
        rows.push(GoldenRow {
            law_id: parts[0].to_string(),
            sites: parts[1].parse().map_err(|_| CliError::BadData {
                path: path.to_path_buf(),
                detail: format!("line {}: bad sites", i + 1),
            })?,
            rho: parse_f64(parts[2], path, i + 1)?,
            key: parse_f64(parts[3], path, i + 1)?,
            quantity: parts[4].to_string(),
            value: parse_f64(parts[5], path, i + 1)?,
        });
    }
    Ok(rows)
}

/// One exact reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenRow {
    pub law_id: String,
    pub sites: usize,
    pub rho: f64,
    /// Time or resolvent parameter, depending on the quantity.
    pub key: f64,
    pub quantity: String,
    pub value: f64,
}

/// Helper shared by the collapse report: the centered x range of a profile.
pub fn centered_range(sites: usize) -> Vec<i64> {
    let l = sites as i64;
    ((-(l / 2) + 1)..=(l / 2)).collect()
}
