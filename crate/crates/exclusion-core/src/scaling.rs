//! Exponent extraction and Laplace-domain analysis of diffusivity curves.
//!
//! The growth statements under test are asymptotic with unknown constants,
//! so everything here reports fitted exponents with confidence intervals and
//! keeps extrapolation under an explicit budget: the integral transform never
//! lets the extrapolated tail contribute more than 1% to a reported value.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::{gamma, gamma_ur};
use thiserror::Error;

use crate::estimators::{DiffusivityCurve, TwoPointEstimate};
use crate::law::JumpLaw;

const QUAD_RTOL: f64 = 1e-9;
const TAIL_CAP: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum ScalingError {
    #[error("{found} points in the fit window; at least 5 required")]
    InsufficientPoints { found: usize },
    #[error("curve contains non-positive values in the fit window")]
    NonPositiveValues,
    #[error("lambda {lambda} below the admissible minimum {min} for this curve")]
    LambdaOutOfRange { lambda: f64, min: f64 },
    #[error("extrapolated tail contributes {fraction:.4} at lambda {lambda}; cap is 0.01")]
    TailDominated { lambda: f64, fraction: f64 },
    #[error("negative resolvent-form value at lambda {lambda}")]
    NegativeNorm { lambda: f64 },
    #[error("curves overlap over {decades:.2} decades; at least 1 required")]
    InsufficientOverlap { decades: f64 },
}

/// Weighted log-log linear fit of a curve segment.
#[derive(Debug, Clone)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    pub exponent_ci: (f64, f64),
    pub residual_rms: f64,
}

impl PowerLawFit {
    /// Half-width of the 95% interval translated back to one standard error.
    pub fn exponent_se(&self) -> f64 {
        (self.exponent_ci.1 - self.exponent_ci.0) / (2.0 * 1.96)
    }
}

/// Laplace transform of t D(t) on a lambda grid, with the extrapolation
/// share accounted per point.
#[derive(Debug, Clone)]
pub struct LaplaceProfile {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub tail_fraction: Vec<f64>,
}

/// One extracted resolvent-form point.
#[derive(Debug, Clone, Copy)]
pub struct H1Point {
    pub lambda: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Outcome of the two-law exponent comparison.
#[derive(Debug, Clone)]
pub struct LawComparison {
    pub lambda_window: (f64, f64),
    pub fit_a: PowerLawFit,
    pub fit_b: PowerLawFit,
    pub slope_difference: f64,
    pub slope_difference_se: f64,
}

/// Pairwise rescaled-profile discrepancies.
#[derive(Debug, Clone)]
pub struct CollapseReport {
    pub exponent: f64,
    /// (t_a, t_b, mean absolute discrepancy of the rescaled profiles).
    pub pairs: Vec<(f64, f64, f64)>,
}

fn loglog_fit(ts: &[f64], ds: &[f64], ses: Option<&[f64]>) -> Result<PowerLawFit, ScalingError> {
    let n = ts.len();
    if n < 5 {
        return Err(ScalingError::InsufficientPoints { found: n });
    }
    if ds.iter().any(|&d| d <= 0.0) {
        return Err(ScalingError::NonPositiveValues);
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = ds.iter().map(|d| d.ln()).collect();

    let usable = ses.filter(|s| s.iter().all(|&e| e.is_finite() && e > 0.0));
    let (slope, intercept, var_slope) = match usable {
        Some(ses) => {
            // Known per-point errors: se(ln d) = se/d.
            let ws: Vec<f64> = ses.iter().zip(ds).map(|(&e, &d)| (d / e) * (d / e)).collect();
            let s: f64 = ws.iter().sum();
            let sx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * x).sum();
            let sy: f64 = ws.iter().zip(&ys).map(|(w, y)| w * y).sum();
            let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * x * x).sum();
            let sxy: f64 = ws
                .iter()
                .zip(xs.iter().zip(&ys))
                .map(|(w, (x, y))| w * x * y)
                .sum();
            let delta = s * sxx - sx * sx;
            let b = (s * sxy - sx * sy) / delta;
            let a = (sxx * sy - sx * sxy) / delta;
            (b, a, s / delta)
        }
        None => {
            let xbar = xs.iter().sum::<f64>() / n as f64;
            let ybar = ys.iter().sum::<f64>() / n as f64;
            let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
            let sxy: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - xbar) * (y - ybar))
                .sum();
            let b = sxy / sxx;
            let a = ybar - b * xbar;
            let rss: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| {
                    let r = y - (a + b * x);
                    r * r
                })
                .sum();
            (b, a, rss / (n as f64 - 2.0) / sxx)
        }
    };

    let quantile = match usable {
        Some(_) => 1.96,
        None => StudentsT::new(0.0, 1.0, n as f64 - 2.0)
            .expect("valid dof")
            .inverse_cdf(0.975),
    };
    let half = quantile * var_slope.max(0.0).sqrt();
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(PowerLawFit {
        exponent: slope,
        amplitude: intercept.exp(),
        window: (ts[0], ts[n - 1]),
        exponent_ci: (slope - half, slope + half),
        residual_rms: (rss / n as f64).sqrt(),
    })
}

/// Weighted log-log fit of arbitrary positive points. Errors are used for
/// weighting only when every entry is finite and positive; exact data yields
/// a zero-width interval.
pub fn fit_power_law_points(
    xs: &[f64],
    values: &[f64],
    stderr: Option<&[f64]>,
) -> Result<PowerLawFit, ScalingError> {
    loglog_fit(xs, values, stderr)
}

/// Weighted least squares of log D against log t inside the window.
pub fn fit_power_law(
    curve: &DiffusivityCurve,
    window: (f64, f64),
) -> Result<PowerLawFit, ScalingError> {
    let mut ts = Vec::new();
    let mut ds = Vec::new();
    let mut ses = Vec::new();
    for (i, &t) in curve.grid.points().iter().enumerate() {
        if t >= window.0 * (1.0 - 1e-12) && t <= window.1 * (1.0 + 1e-12) {
            ts.push(t);
            ds.push(curve.d_values[i]);
            ses.push(curve.stderr[i]);
        }
    }
    loglog_fit(&ts, &ds, Some(&ses))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    let eps = rtol * whole.abs().max(1e-300);
    recurse(f, a, b, fa, fm, fb, whole, eps, 40)
}

struct TransformPieces {
    sigma2: f64,
    ts: Vec<f64>,
}

impl TransformPieces {
    /// head + body + tail of int_0^inf e^{-lambda t} t D(t) dt for one set of
    /// curve values, with the short-time constant extension and the fitted
    /// tail power law. Returns (value, tail_part).
    fn evaluate(&self, ds: &[f64], lambda: f64) -> Result<(f64, f64), ScalingError> {
        let t0 = self.ts[0];
        let t_last = *self.ts.last().unwrap();
        let head =
            self.sigma2 * (1.0 - (-lambda * t0).exp() * (1.0 + lambda * t0)) / (lambda * lambda);

        let mut body = 0.0;
        for k in 0..self.ts.len() - 1 {
            let (ta, tb) = (self.ts[k], self.ts[k + 1]);
            let (da, db) = (ds[k], ds[k + 1]);
            if da <= 0.0 || db <= 0.0 {
                return Err(ScalingError::NonPositiveValues);
            }
            let p = (db / da).ln() / (tb / ta).ln();
            let f = |t: f64| (-lambda * t).exp() * t * da * (t / ta).powf(p);
            body += adaptive_simpson(&f, ta, tb, QUAD_RTOL);
        }

        // Tail beyond the data: power law fitted on the last decade.
        let lo = t_last / 10.0;
        let mut tail_ts = Vec::new();
        let mut tail_ds = Vec::new();
        for (k, &t) in self.ts.iter().enumerate() {
            if t >= lo * (1.0 - 1e-12) {
                tail_ts.push(t);
                tail_ds.push(ds[k]);
            }
        }
        let fit = loglog_fit(&tail_ts, &tail_ds, None)?;
        let shape = 2.0 + fit.exponent;
        let tail =
            fit.amplitude * lambda.powf(-shape) * gamma(shape) * gamma_ur(shape, lambda * t_last);
        Ok((head + body + tail, tail))
    }
}

/// Laplace transform of t D(t): data interpolated as piecewise power laws,
/// extended by `sigma2` below the first grid point and by the last-decade
/// power-law fit beyond the last one.
pub fn laplace_transform_td(
    curve: &DiffusivityCurve,
    sigma2: f64,
    lambdas: &[f64],
) -> Result<LaplaceProfile, ScalingError> {
    let ts = curve.grid.points().to_vec();
    let t_last = *ts.last().unwrap();
    let min_lambda = 10.0 / t_last;
    let mut sorted: Vec<f64> = lambdas.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for &l in &sorted {
        if !(l > 0.0) || l < min_lambda * (1.0 - 1e-9) {
            return Err(ScalingError::LambdaOutOfRange {
                lambda: l,
                min: min_lambda,
            });
        }
    }
    let pieces = TransformPieces { sigma2, ts };

    let mut values = Vec::with_capacity(sorted.len());
    let mut fractions = Vec::with_capacity(sorted.len());
    for &l in &sorted {
        let (value, tail) = pieces.evaluate(&curve.d_values, l)?;
        let fraction = tail / value;
        if fraction > TAIL_CAP {
            return Err(ScalingError::TailDominated {
                lambda: l,
                fraction,
            });
        }
        values.push(value);
        fractions.push(fraction);
    }

    let have_errors = curve
        .stderr
        .iter()
        .all(|&e| e.is_finite() && e > 0.0);
    let stderr = if have_errors {
        let mut var = vec![0.0f64; sorted.len()];
        let mut bumped = curve.d_values.clone();
        for k in 0..bumped.len() {
            bumped[k] += curve.stderr[k];
            for (j, &l) in sorted.iter().enumerate() {
                let (v, _) = pieces.evaluate(&bumped, l)?;
                let dv = v - values[j];
                var[j] += dv * dv;
            }
            bumped[k] = curve.d_values[k];
        }
        var.iter().map(|v| v.sqrt()).collect()
    } else {
        vec![0.0; sorted.len()]
    };

    Ok(LaplaceProfile {
        lambdas: sorted,
        values,
        stderr,
        tail_fraction: fractions,
    })
}

/// Inverts the transform relation pointwise:
/// resolvent form = (lambda^2 LT - sigma^2) / (2 chi).
pub fn extract_h1_profile(
    profile: &LaplaceProfile,
    law: &JumpLaw,
    rho: f64,
) -> Result<Vec<H1Point>, ScalingError> {
    let chi = rho * (1.0 - rho);
    profile
        .lambdas
        .iter()
        .zip(profile.values.iter().zip(&profile.stderr))
        .map(|(&lambda, (&v, &se))| {
            let value = (lambda * lambda * v - law.sigma2()) / (2.0 * chi);
            if value <= 0.0 {
                return Err(ScalingError::NegativeNorm { lambda });
            }
            Ok(H1Point {
                lambda,
                value,
                stderr: lambda * lambda * se / (2.0 * chi),
            })
        })
        .collect()
}

/// Fits the log-log slope of a Laplace profile.
pub fn fit_laplace_slope(profile: &LaplaceProfile) -> Result<PowerLawFit, ScalingError> {
    let ses = if profile.stderr.iter().all(|&e| e > 0.0) {
        Some(profile.stderr.as_slice())
    } else {
        None
    };
    loglog_fit(&profile.lambdas, &profile.values, ses)
}

/// Fits the log-log slope of extracted resolvent-form points.
pub fn fit_h1_slope(points: &[H1Point]) -> Result<PowerLawFit, ScalingError> {
    let ls: Vec<f64> = points.iter().map(|p| p.lambda).collect();
    let vs: Vec<f64> = points.iter().map(|p| p.value).collect();
    let ses: Vec<f64> = points.iter().map(|p| p.stderr).collect();
    let usable = ses.iter().all(|&e| e > 0.0);
    loglog_fit(&ls, &vs, if usable { Some(&ses) } else { None })
}

/// Compares the Laplace slopes of two curves over their shared decade(s).
pub fn compare_two_laws(
    curve_a: &DiffusivityCurve,
    sigma2_a: f64,
    curve_b: &DiffusivityCurve,
    sigma2_b: f64,
) -> Result<LawComparison, ScalingError> {
    let span = |c: &DiffusivityCurve| {
        let p = c.grid.points();
        (p[0], *p.last().unwrap())
    };
    let (a0, a1) = span(curve_a);
    let (b0, b1) = span(curve_b);
    let t_lo = a0.max(b0);
    let t_hi = a1.min(b1);
    let decades = (t_hi / t_lo).log10();
    if decades < 1.0 {
        return Err(ScalingError::InsufficientOverlap { decades });
    }
    let l_lo = 10.0 / t_hi;
    let ratio = 10.0f64.powf(1.0 / 6.0);
    let lambdas: Vec<f64> = (0..7).map(|k| l_lo * ratio.powi(k)).collect();
    let prof_a = laplace_transform_td(curve_a, sigma2_a, &lambdas)?;
    let prof_b = laplace_transform_td(curve_b, sigma2_b, &lambdas)?;
    let fit_a = fit_laplace_slope(&prof_a)?;
    let fit_b = fit_laplace_slope(&prof_b)?;
    let d = fit_a.exponent - fit_b.exponent;
    let se = (fit_a.exponent_se().powi(2) + fit_b.exponent_se().powi(2)).sqrt();
    Ok(LawComparison {
        lambda_window: (l_lo, l_lo * ratio.powi(6)),
        fit_a,
        fit_b,
        slope_difference: d,
        slope_difference_se: se,
    })
}

/// Rescales covariance profiles by the given spreading exponent and reports
/// pairwise mean absolute discrepancies over the overlapping range.
pub fn scaling_collapse(
    estimates: &[TwoPointEstimate],
    law: &JumpLaw,
    rho: f64,
    exponent: f64,
) -> CollapseReport {
    let rescaled: Vec<(f64, Vec<f64>, Vec<f64>)> = estimates
        .iter()
        .map(|est| {
            let t = est.t;
            let scale = t.powf(exponent);
            let center = (1.0 - 2.0 * rho) * law.drift() * t;
            let l = est.sites as i64;
            let mut ys = Vec::with_capacity(est.sites);
            let mut vals = Vec::with_capacity(est.sites);
            for xc in (-(l / 2) + 1)..=(l / 2) {
                let shift = xc.rem_euclid(l) as usize;
                ys.push((xc as f64 - center) / scale);
                vals.push(scale * est.s_values[shift]);
            }
            (t, ys, vals)
        })
        .collect();

    let interp = |ys: &[f64], vals: &[f64], y: f64| -> f64 {
        let i = ys.partition_point(|&v| v < y).clamp(1, ys.len() - 1);
        let (y0, y1) = (ys[i - 1], ys[i]);
        let w = if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.0 };
        vals[i - 1] * (1.0 - w) + vals[i] * w
    };

    let mut pairs = Vec::new();
    for i in 0..rescaled.len() {
        for j in i + 1..rescaled.len() {
            let (ta, ya, va) = &rescaled[i];
            let (tb, yb, vb) = &rescaled[j];
            let lo = ya[0].max(yb[0]);
            let hi = ya[ya.len() - 1].min(yb[yb.len() - 1]);
            let m = 400;
            let mut acc = 0.0;
            for k in 0..m {
                let y = lo + (hi - lo) * (k as f64 + 0.5) / m as f64;
                acc += (interp(ya, va, y) - interp(yb, vb, y)).abs();
            }
            pairs.push((*ta, *tb, acc / m as f64));
        }
    }
    CollapseReport {
        exponent,
        pairs,
    }
}
