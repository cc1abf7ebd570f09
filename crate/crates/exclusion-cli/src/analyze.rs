//! Post-run analysis: exponent fits, Laplace-domain profiles, collapse
//! reports, and a markdown summary with explicit claim verdicts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use exclusion_core::estimators::{DiffusivityCurve, EstimatorTag, TwoPointEstimate};
use exclusion_core::law::JumpLaw;
use exclusion_core::scaling::{
    compare_two_laws, extract_h1_profile, fit_h1_slope, fit_power_law_points,
    laplace_transform_td, scaling_collapse, PowerLawFit, ScalingError,
};

use crate::io::{
    profile_to_shift_order, read_diffusivity, read_two_point, write_fits, write_laplace_profile,
    FitRecord,
};
use crate::manifest::RunManifest;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimStatus {
    Pass,
    Fail,
    Report,
}

impl ClaimStatus {
    fn tag(self) -> &'static str {
        match self {
            ClaimStatus::Pass => "pass",
            ClaimStatus::Fail => "fail",
            ClaimStatus::Report => "report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClaimLine {
    pub status: ClaimStatus,
    pub text: String,
}

pub struct AnalyzeReport {
    pub out_dir: PathBuf,
    pub claims: Vec<ClaimLine>,
    pub summary_path: PathBuf,
}

struct InputData {
    label: String,
    manifest: RunManifest,
    law: JumpLaw,
    series: Vec<(String, Vec<(f64, f64, f64)>)>,
    profiles: Vec<(f64, Vec<i64>, Vec<f64>, Vec<f64>)>,
}

fn load_input(dir: &Path) -> Result<InputData, CliError> {
    if !dir.join("manifest.json").exists() || !dir.join("diffusivity.csv").exists() {
        return Err(CliError::MissingInput {
            path: dir.to_path_buf(),
        });
    }
    let manifest = RunManifest::read(dir)?;
    let law = manifest.config.jump_law()?;
    let series = read_diffusivity(dir)?;
    let profiles = if dir.join("two_point.csv").exists() {
        read_two_point(dir)?
    } else {
        Vec::new()
    };
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    Ok(InputData {
        label,
        manifest,
        law,
        series,
        profiles,
    })
}

fn last_decade_fit(
    rows: &[(f64, f64, f64)],
    shrink: f64,
) -> Result<(PowerLawFit, (f64, f64)), ScalingError> {
    let t_hi = rows.last().map(|r| r.0).unwrap_or(1.0);
    let t_lo = t_hi / 10.0f64.powf(shrink);
    let mut ts = Vec::new();
    let mut ds = Vec::new();
    let mut ses = Vec::new();
    for &(t, d, se) in rows {
        if t >= t_lo * (1.0 - 1e-12) {
            ts.push(t);
            ds.push(d);
            ses.push(se);
        }
    }
    let fit = fit_power_law_points(&ts, &ds, Some(&ses))?;
    Ok((fit, (t_lo, t_hi)))
}

/// Rebuilds a full-grid curve when the CSV rows cover every grid time.
fn full_curve(input: &InputData, tag: &str, rows: &[(f64, f64, f64)]) -> Option<DiffusivityCurve> {
    let grid = input.manifest.config.time_grid().ok()?;
    if rows.len() != grid.len() {
        return None;
    }
    for (&g, r) in grid.points().iter().zip(rows) {
        if (r.0 - g).abs() > 1e-9 * g.abs().max(1.0) {
            return None;
        }
    }
    let estimator_tag = match tag {
        "definition" => EstimatorTag::Definition,
        "green_kubo" => EstimatorTag::GreenKubo,
        "second_class" => EstimatorTag::SecondClass,
        "height" => EstimatorTag::Height,
        _ => return None,
    };
    Some(DiffusivityCurve {
        grid,
        d_values: rows.iter().map(|r| r.1).collect(),
        stderr: rows.iter().map(|r| r.2).collect(),
        estimator_tag,
    })
}

fn admissible_lambdas(t_last: f64) -> Vec<f64> {
    let lo = 10.0 / t_last;
    let ratio = 10.0f64.powf(1.0 / 6.0);
    (0..7).map(|k| lo * ratio.powi(k)).collect()
}

struct InputAnalysis {
    fits: Vec<FitRecord>,
    claims: Vec<ClaimLine>,
    collapse_lines: Vec<String>,
    laplace_written: bool,
    notes: Vec<String>,
}

fn analyze_input(input: &InputData, out: &Path) -> Result<InputAnalysis, CliError> {
    let mut fits = Vec::new();
    let mut claims = Vec::new();
    let mut notes = Vec::new();
    let law = &input.law;
    let rho = input.manifest.config.rho;
    let sigma2 = law.sigma2();

    for (tag, rows) in &input.series {
        for (suffix, shrink) in [("", 1.0), (":half_window", 0.5)] {
            match last_decade_fit(rows, shrink) {
                Ok((fit, _)) => fits.push(FitRecord::from_fit(&format!("{tag}{suffix}"), &fit)),
                Err(e) => notes.push(format!("fit {tag}{suffix}: {e}")),
            }
        }
    }

    // Exponent claims keyed to the law type.
    let def_rows = input.series.iter().find(|(tag, _)| tag == "definition");
    if let Some((_, rows)) = def_rows {
        if let Ok((fit, window)) = last_decade_fit(rows, 1.0) {
            let se = fit.exponent_se();
            if law.is_mean_zero() {
                let ok = fit.exponent.abs() <= 0.1;
                claims.push(ClaimLine {
                    status: if ok { ClaimStatus::Pass } else { ClaimStatus::Fail },
                    text: format!(
                        "mean-zero law: growth exponent {:.4} on [{:.3},{:.3}] stays within 0.1 of 0",
                        fit.exponent, window.0, window.1
                    ),
                });
                let mut worst = 0.0f64;
                let mut all_ok = true;
                for &(_, d, se) in rows {
                    let dev = (d - sigma2).abs();
                    worst = worst.max(dev / se.max(1e-300));
                    if dev > 3.0 * se {
                        all_ok = false;
                    }
                }
                claims.push(ClaimLine {
                    status: if all_ok { ClaimStatus::Pass } else { ClaimStatus::Fail },
                    text: format!(
                        "mean-zero law: D(t) equals sigma2 = {sigma2} within 3 stderr at every time (worst {worst:.2} sigma)"
                    ),
                });
            } else {
                let in_window = (0.25..=0.45).contains(&fit.exponent);
                let excludes_zero = fit.exponent > 3.0 * se;
                claims.push(ClaimLine {
                    status: if in_window && excludes_zero {
                        ClaimStatus::Pass
                    } else {
                        ClaimStatus::Fail
                    },
                    text: format!(
                        "drifted law: growth exponent {:.4} +- {:.4} lies in [0.25, 0.45] and excludes 0 at 3 sigma",
                        fit.exponent, se
                    ),
                });
            }
        }
    }

    // Laplace-domain work needs a contiguous full-grid curve.
    let mut laplace_written = false;
    if let Some((tag, rows)) = def_rows.or_else(|| input.series.first()) {
        if let Some(curve) = full_curve(input, tag, rows) {
            let t_last = curve.grid.last();
            let lambdas = admissible_lambdas(t_last);
            match laplace_transform_td(&curve, sigma2, &lambdas) {
                Ok(profile) => {
                    write_laplace_profile(&out.join("laplace_profile.csv"), &profile)?;
                    laplace_written = true;
                    let ses = if profile.stderr.iter().all(|&e| e > 0.0) {
                        Some(profile.stderr.as_slice())
                    } else {
                        None
                    };
                    match fit_power_law_points(&profile.lambdas, &profile.values, ses) {
                        Ok(fit) => {
                            if !law.is_mean_zero() {
                                let ok = (fit.exponent + 7.0 / 3.0).abs() <= 0.4;
                                claims.push(ClaimLine {
                                    status: if ok { ClaimStatus::Pass } else { ClaimStatus::Fail },
                                    text: format!(
                                        "transform of t D(t): log-log slope {:.4} within 0.4 of -7/3",
                                        fit.exponent
                                    ),
                                });
                            }
                            fits.push(FitRecord::from_fit(&format!("laplace:{tag}"), &fit));
                        }
                        Err(e) => notes.push(format!("laplace slope: {e}")),
                    }
                    match extract_h1_profile(&profile, law, rho) {
                        Ok(points) => match fit_h1_slope(&points) {
                            Ok(fit) => {
                                if !law.is_mean_zero() {
                                    let ok = (fit.exponent + 1.0 / 3.0).abs() <= 0.15;
                                    claims.push(ClaimLine {
                                        status: if ok {
                                            ClaimStatus::Pass
                                        } else {
                                            ClaimStatus::Fail
                                        },
                                        text: format!(
                                            "resolvent-form profile: slope {:.4} within 0.15 of -1/3",
                                            fit.exponent
                                        ),
                                    });
                                }
                                fits.push(FitRecord::from_fit(&format!("h1:{tag}"), &fit));
                            }
                            Err(e) => notes.push(format!("h1 slope: {e}")),
                        },
                        Err(e) => notes.push(format!("h1 extraction: {e}")),
                    }
                }
                Err(e) => notes.push(format!("laplace transform: {e}")),
            }
        } else {
            notes.push(format!("series {tag} does not cover the full grid; transform skipped"));
        }
    }

    // Collapse report over the latest profiles.
    let mut collapse_lines = Vec::new();
    if input.profiles.len() >= 2 {
        let take = input.profiles.len().min(3);
        let chosen = &input.profiles[input.profiles.len() - take..];
        let estimates: Vec<TwoPointEstimate> = chosen
            .iter()
            .map(|(t, xs, ss, ses)| TwoPointEstimate {
                t: *t,
                rho,
                sites: xs.len(),
                replicas: input.manifest.config.replicas as usize,
                s_values: profile_to_shift_order(xs, ss),
                stderr: profile_to_shift_order(xs, ses),
                spatial_sum: 0.0,
                spatial_sum_stderr: 0.0,
                first_moment: 0.0,
                first_moment_stderr: 0.0,
                max_identity_deviation: 0.0,
            })
            .collect();
        let exponent = if law.is_mean_zero() { 0.5 } else { 2.0 / 3.0 };
        let report = scaling_collapse(&estimates, law, rho, exponent);
        for (ta, tb, l1) in &report.pairs {
            collapse_lines.push(format!(
                "t={ta} vs t={tb}: rescaled profiles differ by {l1:.3e} (exponent {exponent:.4})"
            ));
        }
        claims.push(ClaimLine {
            status: ClaimStatus::Report,
            text: format!(
                "profile collapse at spreading exponent {exponent:.4}: {} pair(s) reported",
                report.pairs.len()
            ),
        });
    }

    Ok(InputAnalysis {
        fits,
        claims,
        collapse_lines,
        laplace_written,
        notes,
    })
}

pub fn cmd_analyze(inputs: &[PathBuf], out_dir: &Path) -> Result<AnalyzeReport, CliError> {
    if inputs.is_empty() || inputs.len() > 2 {
        return Err(CliError::Usage(
            "analyze takes one or two input directories".into(),
        ));
    }
    let loaded: Vec<InputData> = inputs
        .iter()
        .map(|p| load_input(p))
        .collect::<Result<_, _>>()?;

    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let mut summary = String::from("# Run analysis\n");
    let mut all_claims = Vec::new();

    let mut analyses = Vec::new();
    for input in &loaded {
        let sub = out_dir.join(&input.label);
        std::fs::create_dir_all(&sub).map_err(|source| CliError::Io {
            path: sub.clone(),
            source,
        })?;
        let analysis = analyze_input(input, &sub)?;
        write_fits(&sub.join("fits.json"), &analysis.fits)?;

        let cfg = &input.manifest.config;
        let _ = writeln!(summary, "\n## Input: {}", input.label);
        let _ = writeln!(
            summary,
            "\nlaw {} | rho {} | sites {} | replicas {} | seed {}\n",
            input.law.id_string(),
            cfg.rho,
            cfg.sites,
            cfg.replicas,
            cfg.master_seed
        );
        if input.manifest.wrap_override_active {
            let _ = writeln!(
                summary,
                "warning: run used a ring smaller than the correlation cone (wrap override).\n"
            );
        }
        let _ = writeln!(summary, "### Fitted exponents\n");
        let _ = writeln!(
            summary,
            "| series | window | exponent | 95% interval | amplitude | residual rms |"
        );
        let _ = writeln!(summary, "|---|---|---|---|---|---|");
        for f in &analysis.fits {
            let _ = writeln!(
                summary,
                "| {} | [{:.4}, {:.4}] | {:.4} | [{:.4}, {:.4}] | {:.4} | {:.2e} |",
                f.estimator_tag, f.window.0, f.window.1, f.exponent, f.ci_lo, f.ci_hi, f.amplitude,
                f.residual_rms
            );
        }
        let _ = writeln!(summary, "\n### Claims\n");
        for c in &analysis.claims {
            let _ = writeln!(summary, "- [{}] {}", c.status.tag(), c.text);
        }
        if !analysis.collapse_lines.is_empty() {
            let _ = writeln!(summary, "\n### Profile collapse\n");
            for line in &analysis.collapse_lines {
                let _ = writeln!(summary, "- {line}");
            }
        }
        if !analysis.notes.is_empty() {
            let _ = writeln!(summary, "\n### Notes\n");
            for n in &analysis.notes {
                let _ = writeln!(summary, "- {n}");
            }
        }
        if analysis.laplace_written {
            let _ = writeln!(
                summary,
                "\nTransform profile written to {}/laplace_profile.csv",
                input.label
            );
        }
        all_claims.extend(analysis.claims.clone());
        analyses.push(analysis);
    }

    if loaded.len() == 2 {
        let _ = writeln!(summary, "\n## Two-law comparison\n");
        let a = &loaded[0];
        let b = &loaded[1];
        let curve_of = |input: &InputData| {
            input
                .series
                .iter()
                .find(|(tag, _)| tag == "definition")
                .and_then(|(tag, rows)| full_curve(input, tag, rows))
        };
        match (curve_of(a), curve_of(b)) {
            (Some(ca), Some(cb)) => {
                match compare_two_laws(&ca, a.law.sigma2(), &cb, b.law.sigma2()) {
                    Ok(cmp) => {
                        let _ = writeln!(
                            summary,
                            "lambda window [{:.4}, {:.4}]: slopes {:.4} ({}) and {:.4} ({}), difference {:.4} +- {:.4}\n",
                            cmp.lambda_window.0,
                            cmp.lambda_window.1,
                            cmp.fit_a.exponent,
                            a.label,
                            cmp.fit_b.exponent,
                            b.label,
                            cmp.slope_difference,
                            cmp.slope_difference_se
                        );
                        let agree = cmp.slope_difference.abs() <= 0.3;
                        all_claims.push(ClaimLine {
                            status: if agree { ClaimStatus::Pass } else { ClaimStatus::Fail },
                            text: format!(
                                "the two transform slopes agree within 0.3 (difference {:.4})",
                                cmp.slope_difference
                            ),
                        });
                        for (fit, label) in [(&cmp.fit_a, &a.label), (&cmp.fit_b, &b.label)] {
                            let dist = (fit.exponent + 2.0).abs();
                            let se = fit.exponent_se().max(1e-300);
                            let ok = dist > 3.0 * se;
                            all_claims.push(ClaimLine {
                                status: if ok { ClaimStatus::Pass } else { ClaimStatus::Fail },
                                text: format!(
                                    "{label}: slope {:.4} differs from the diffusive value -2 by {:.1} sigma",
                                    fit.exponent,
                                    dist / se
                                ),
                            });
                        }
                    }
                    Err(e) => {
                        all_claims.push(ClaimLine {
                            status: ClaimStatus::Report,
                            text: format!("comparison unavailable: {e}"),
                        });
                    }
                }
            }
            _ => {
                all_claims.push(ClaimLine {
                    status: ClaimStatus::Report,
                    text: "comparison needs full-grid definition series in both inputs".into(),
                });
            }
        }
        let start = analyses[0].claims.len() + analyses[1].claims.len();
        for c in &all_claims[start..] {
            let _ = writeln!(summary, "- [{}] {}", c.status.tag(), c.text);
        }
    }

    let summary_path = out_dir.join("summary.md");
    std::fs::write(&summary_path, summary).map_err(|source| CliError::Io {
        path: summary_path.clone(),
        source,
    })?;

    Ok(AnalyzeReport {
        out_dir: out_dir.to_path_buf(),
        claims: all_claims,
        summary_path,
    })
}
