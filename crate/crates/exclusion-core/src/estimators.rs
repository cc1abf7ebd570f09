//! Statistical estimators over replica traces: the two-point function, the
//! diffusivity by four routes (centered second moment, integrated-current
//! fluctuation, tracked discrepancy particle, height-field variance), and
//! sum-rule residuals.
//!
//! All reductions run in replica order over immutable traces, so results are
//! independent of how the replicas were scheduled.

use thiserror::Error;

use crate::grid::TimeGrid;
use crate::law::JumpLaw;
use crate::ring::{centered_site, circular_counts};
use crate::rng::{derived_seed, replica_rng};
use crate::stats::{bootstrap_indices, variance_from_sums};
use crate::trace::{ReplicaTrace, SecondClassTrace, TraceRow};

/// Tolerance for the per-replica conservation identity
/// sum_x s_r(x) = (N - rho L)^2 / L, which holds to float roundoff.
pub const ZEROTH_IDENTITY_TOL: f64 = 1e-10;

const BOOTSTRAP_RESAMPLES: usize = 200;
const HEIGHT_BOOTSTRAP_TAG: u64 = 0x6865_6967_6874_7376;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("time {t} was not recorded in the traces")]
    GridMiss { t: f64 },
    #[error("no replicas supplied")]
    NoReplicas,
    #[error("window for t={t} does not fit a ring of {sites} sites")]
    WrapDominated { t: f64, sites: usize },
    #[error("traces carry no flux integral at time {t}")]
    MissingAccumulator { t: f64 },
    #[error("height route requires the unit-step totally asymmetric law")]
    NotTasep,
    #[error("window half-width {window} does not fit a ring of {sites} sites")]
    WindowTooWide { window: usize, sites: usize },
}

/// Across-replica estimate of the occupancy covariance at one time.
///
/// `s_values[x]` estimates the covariance at ring shift x (use
/// `centered_site` to read it in centered coordinates). The per-replica
/// spatial sum and first moment are aggregated here as well because their
/// across-replica spread is not recoverable from the per-x stderr.
#[derive(Debug, Clone)]
pub struct TwoPointEstimate {
    pub t: f64,
    pub rho: f64,
    pub sites: usize,
    pub replicas: usize,
    pub s_values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mean and stderr of the per-replica spatial sum sum_x s_r(x).
    pub spatial_sum: f64,
    pub spatial_sum_stderr: f64,
    /// Mean and stderr of the per-replica first moment (1/chi) sum_x x_c s_r.
    pub first_moment: f64,
    pub first_moment_stderr: f64,
    /// Largest deviation of any replica from the conservation identity
    /// sum_x s_r(x) = (N - rho L)^2 / L.
    pub max_identity_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorTag {
    Definition,
    GreenKubo,
    SecondClass,
    Height,
}

impl EstimatorTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorTag::Definition => "definition",
            EstimatorTag::GreenKubo => "green_kubo",
            EstimatorTag::SecondClass => "second_class",
            EstimatorTag::Height => "height",
        }
    }
}

/// Diffusivity estimates along a time grid from one estimation route.
#[derive(Debug, Clone)]
pub struct DiffusivityCurve {
    pub grid: TimeGrid,
    pub d_values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub estimator_tag: EstimatorTag,
}

#[derive(Debug, Clone, Copy)]
pub struct SumRuleResiduals {
    pub zeroth: f64,
    pub zeroth_stderr: f64,
    pub first: f64,
    pub first_stderr: f64,
}

/// Second-class particle summary at one time.
#[derive(Debug, Clone)]
pub struct SecondClassStats {
    pub t: f64,
    pub d_value: f64,
    pub d_stderr: f64,
    pub mean_displacement: f64,
    pub mean_displacement_stderr: f64,
    /// Empirical law of the wrapped position, indexed by ring shift.
    pub histogram: Vec<f64>,
    pub replicas: usize,
}

fn row_of<'a>(trace: &'a ReplicaTrace, t: f64) -> Option<&'a TraceRow> {
    trace.row_at(t)
}

/// Spatial half-width that the centered-moment routes sum over.
///
/// The covariance profile concentrates within the ballistic spread
/// sqrt(sigma2 t) plus, for drifted laws, the slower t^{2/3} broadening of
/// the fluctuation field; beyond a few widths the summand is pure noise with
/// variance growing like the fifth power of the cut, so an adaptive cut is a
/// variance control, not an approximation knob.
pub fn definition_window(law: &JumpLaw, t: f64) -> usize {
    let ballistic = 6.0 * (law.sigma2() * t).sqrt();
    let spread = if law.drift() == 0.0 {
        ballistic
    } else {
        ballistic.max(3.5 * (law.sigma2() * t * t).powf(1.0 / 3.0))
    };
    3 * law.range() as usize + spread.ceil() as usize
}

/// Mean occupancy covariance across replicas, centered with the true rho.
pub fn estimate_two_point(
    traces: &[ReplicaTrace],
    t: f64,
    rho: f64,
) -> Result<TwoPointEstimate, EstimatorError> {
    if traces.is_empty() {
        return Err(EstimatorError::NoReplicas);
    }
    let sites = traces[0].sites;
    let l = sites as f64;
    let n = traces.len();
    let chi = rho * (1.0 - rho);

    let mut sum = vec![0.0f64; sites];
    let mut sumsq = vec![0.0f64; sites];
    let mut sum0 = 0.0;
    let mut sumsq0 = 0.0;
    let mut sum1 = 0.0;
    let mut sumsq1 = 0.0;
    let mut max_dev = 0.0f64;

    for trace in traces {
        let words_t: &[u64] = if t == 0.0 {
            &trace.initial_words
        } else {
            match row_of(trace, t) {
                Some(row) => &row.words,
                None => return Err(EstimatorError::GridMiss { t }),
            }
        };
        let counts = circular_counts(words_t, &trace.initial_words, sites);
        let np = trace.particles as f64;
        let offset = -2.0 * rho * np + rho * rho * l;
        let mut total = 0.0;
        let mut first = 0.0;
        for (x, &c) in counts.iter().enumerate() {
            let s = (c as f64 + offset) / l;
            sum[x] += s;
            sumsq[x] += s * s;
            total += s;
            first += centered_site(x, sites) as f64 * s;
        }
        let identity = (np - rho * l) * (np - rho * l) / l;
        max_dev = max_dev.max((total - identity).abs());
        sum0 += total;
        sumsq0 += total * total;
        let first = first / chi;
        sum1 += first;
        sumsq1 += first * first;
    }

    let nf = n as f64;
    let stderr: Vec<f64> = sum
        .iter()
        .zip(&sumsq)
        .map(|(&s, &ss)| (variance_from_sums(n, s, ss) / nf).sqrt())
        .collect();
    let s_values: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    Ok(TwoPointEstimate {
        t,
        rho,
        sites,
        replicas: n,
        s_values,
        stderr,
        spatial_sum: sum0 / nf,
        spatial_sum_stderr: (variance_from_sums(n, sum0, sumsq0) / nf).sqrt(),
        first_moment: sum1 / nf,
        first_moment_stderr: (variance_from_sums(n, sum1, sumsq1) / nf).sqrt(),
        max_identity_deviation: max_dev,
    })
}

/// Centered-second-moment diffusivity from an averaged covariance profile.
/// The sum runs over the adaptive window around the characteristic position;
/// stderr propagates the per-x stderr through the (linear) moment sum.
pub fn diffusivity_from_two_point(
    s: &TwoPointEstimate,
    law: &JumpLaw,
    rho: f64,
) -> Result<(f64, f64), EstimatorError> {
    assert!(s.t > 0.0, "diffusivity needs t > 0");
    let sites = s.sites;
    let chi = rho * (1.0 - rho);
    let center = (1.0 - 2.0 * rho) * law.drift() * s.t;
    let w = definition_window(law, s.t) as i64;
    let c = center.round() as i64;
    let half = (sites / 2) as i64;
    if c.abs() + w > half || 2 * w + 1 > sites as i64 {
        return Err(EstimatorError::WrapDominated { t: s.t, sites });
    }
    let mut value = 0.0;
    let mut var = 0.0;
    for xc in (c - w)..=(c + w) {
        let shift = xc.rem_euclid(sites as i64) as usize;
        let weight = (xc as f64 - center).powi(2);
        value += weight * s.s_values[shift];
        var += weight * weight * s.stderr[shift] * s.stderr[shift];
    }
    let norm = chi * s.t;
    Ok((value / norm, var.sqrt() / norm))
}

/// Residuals of the two conservation-law identities of the covariance.
pub fn sum_rule_residuals(s: &TwoPointEstimate, law: &JumpLaw, rho: f64) -> SumRuleResiduals {
    let chi = rho * (1.0 - rho);
    SumRuleResiduals {
        zeroth: s.spatial_sum - chi,
        zeroth_stderr: s.spatial_sum_stderr,
        first: s.first_moment - (1.0 - 2.0 * rho) * law.drift() * s.t,
        first_stderr: s.first_moment_stderr,
    }
}

/// Diffusivity from the fluctuation of the time-integrated total flux:
/// D(t) = sigma^2 + (chi/(t L)) E[J(t)^2].
pub fn green_kubo_diffusivity(
    traces: &[ReplicaTrace],
    t: f64,
    law: &JumpLaw,
    rho: f64,
) -> Result<(f64, f64), EstimatorError> {
    if traces.is_empty() {
        return Err(EstimatorError::NoReplicas);
    }
    assert!(t > 0.0, "needs t > 0");
    let sites = traces[0].sites as f64;
    let chi = rho * (1.0 - rho);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for trace in traces {
        let row = row_of(trace, t).ok_or(EstimatorError::MissingAccumulator { t })?;
        let j2 = row.j_integral * row.j_integral;
        sum += j2;
        sumsq += j2 * j2;
    }
    let n = traces.len();
    let mean = sum / n as f64;
    let se = (variance_from_sums(n, sum, sumsq) / n as f64).sqrt();
    let scale = chi / (t * sites);
    Ok((law.sigma2() + scale * mean, scale * se))
}

/// Displacement statistics of the tracked discrepancy particle.
pub fn second_class_statistics(
    traces: &[SecondClassTrace],
    t: f64,
    law: &JumpLaw,
    rho: f64,
) -> Result<SecondClassStats, EstimatorError> {
    if traces.is_empty() {
        return Err(EstimatorError::NoReplicas);
    }
    let sites = traces[0].sites;
    let idx = traces[0]
        .times
        .iter()
        .position(|&u| (u - t).abs() <= 1e-9 * t.max(1.0))
        .ok_or(EstimatorError::GridMiss { t })?;
    assert!(t > 0.0, "needs t > 0");
    let center = (1.0 - 2.0 * rho) * law.drift() * t;
    let n = traces.len();
    let mut sum_d = 0.0;
    let mut sumsq_d = 0.0;
    let mut sum_x = 0.0;
    let mut sumsq_x = 0.0;
    let mut histogram = vec![0.0f64; sites];
    for trace in traces {
        let xu = trace.x_unwrapped[idx] as f64;
        let d = (xu - center) * (xu - center) / t;
        sum_d += d;
        sumsq_d += d * d;
        sum_x += xu;
        sumsq_x += xu * xu;
        histogram[trace.x_sites[idx]] += 1.0;
    }
    for h in histogram.iter_mut() {
        *h /= n as f64;
    }
    Ok(SecondClassStats {
        t,
        d_value: sum_d / n as f64,
        d_stderr: (variance_from_sums(n, sum_d, sumsq_d) / n as f64).sqrt(),
        mean_displacement: sum_x / n as f64,
        mean_displacement_stderr: (variance_from_sums(n, sum_x, sumsq_x) / n as f64).sqrt(),
        histogram,
        replicas: n,
    })
}

/// Height value at centered coordinate x from one trace row:
/// h(x) = 2 . bond0 + signed occupancy sum between the origin and x.
fn height_at(row: &TraceRow, sites: usize, x: i64) -> i64 {
    let occ = |y: i64| -> i64 {
        let site = y.rem_euclid(sites as i64) as usize;
        ((row.words[site / 64] >> (site % 64)) & 1) as i64
    };
    let mut h = 2 * row.bond0;
    if x > 0 {
        for y in 1..=x {
            h += 1 - 2 * occ(y);
        }
    } else {
        for y in (x + 1)..=0 {
            h -= 1 - 2 * occ(y);
        }
    }
    h
}

/// Height-variance diffusivity for the unit-step totally asymmetric law:
/// D_h(t) = (4 chi t)^{-1} sum_{|x-c| <= window} [Var h_t(x) - 4 chi |x - c|]
/// with c = (1-2rho) t. Stderr by bootstrap over replicas.
pub fn height_variance_diffusivity(
    traces: &[ReplicaTrace],
    t: f64,
    law: &JumpLaw,
    rho: f64,
    window: usize,
) -> Result<(f64, f64), EstimatorError> {
    if traces.is_empty() {
        return Err(EstimatorError::NoReplicas);
    }
    if !law.is_unit_tasep() {
        return Err(EstimatorError::NotTasep);
    }
    assert!(t > 0.0, "needs t > 0");
    let sites = traces[0].sites;
    let chi = rho * (1.0 - rho);
    let center = (1.0 - 2.0 * rho) * t;
    let c = center.round() as i64;
    let w = window as i64;
    if c.abs() + w >= (sites / 2) as i64 || window == 0 {
        return Err(EstimatorError::WindowTooWide { window, sites });
    }

    let span = (2 * w + 1) as usize;
    let n = traces.len();
    let mut heights: Vec<i64> = Vec::with_capacity(n * span);
    for trace in traces {
        let row = row_of(trace, t).ok_or(EstimatorError::MissingAccumulator { t })?;
        let h0 = height_at(row, sites, c - w);
        let mut h = h0;
        heights.push(h);
        let occ = |y: i64| -> i64 {
            let site = y.rem_euclid(sites as i64) as usize;
            ((row.words[site / 64] >> (site % 64)) & 1) as i64
        };
        for x in (c - w + 1)..=(c + w) {
            h += 1 - 2 * occ(x);
            heights.push(h);
        }
    }

    let value_of = |indices: &[usize]| -> f64 {
        let m = indices.len() as f64;
        let mut acc = 0.0;
        for k in 0..span {
            let mut s = 0.0;
            let mut ss = 0.0;
            for &r in indices {
                let h = heights[r * span + k] as f64;
                s += h;
                ss += h * h;
            }
            let var = (ss - s * s / m) / (m - 1.0);
            let x = (c - w + k as i64) as f64;
            acc += var - 4.0 * chi * (x - center).abs();
        }
        acc / (4.0 * chi * t)
    };

    let all: Vec<usize> = (0..n).collect();
    let value = value_of(&all);

    let mut rng = replica_rng(derived_seed(HEIGHT_BOOTSTRAP_TAG, t.to_bits()), n as u64);
    let mut boot_sum = 0.0;
    let mut boot_sumsq = 0.0;
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let sample = bootstrap_indices(&mut rng, n);
        let v = value_of(&sample);
        boot_sum += v;
        boot_sumsq += v * v;
    }
    let stderr = variance_from_sums(BOOTSTRAP_RESAMPLES, boot_sum, boot_sumsq).sqrt();
    Ok((value, stderr))
}

/// Builds the centered-moment diffusivity curve, returning the per-time
/// covariance estimates alongside.
pub fn build_definition_curve(
    traces: &[ReplicaTrace],
    grid: &TimeGrid,
    law: &JumpLaw,
    rho: f64,
) -> Result<(DiffusivityCurve, Vec<TwoPointEstimate>), EstimatorError> {
    let mut d_values = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    let mut estimates = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let est = estimate_two_point(traces, t, rho)?;
        let (d, se) = diffusivity_from_two_point(&est, law, rho)?;
        d_values.push(d);
        stderr.push(se);
        estimates.push(est);
    }
    Ok((
        DiffusivityCurve {
            grid: grid.clone(),
            d_values,
            stderr,
            estimator_tag: EstimatorTag::Definition,
        },
        estimates,
    ))
}

/// Builds the integrated-current diffusivity curve.
pub fn build_green_kubo_curve(
    traces: &[ReplicaTrace],
    grid: &TimeGrid,
    law: &JumpLaw,
    rho: f64,
) -> Result<DiffusivityCurve, EstimatorError> {
    let mut d_values = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let (d, se) = green_kubo_diffusivity(traces, t, law, rho)?;
        d_values.push(d);
        stderr.push(se);
    }
    Ok(DiffusivityCurve {
        grid: grid.clone(),
        d_values,
        stderr,
        estimator_tag: EstimatorTag::GreenKubo,
    })
}

/// Builds the discrepancy-particle diffusivity curve plus per-time summaries.
pub fn build_second_class_curve(
    traces: &[SecondClassTrace],
    grid: &TimeGrid,
    law: &JumpLaw,
    rho: f64,
) -> Result<(DiffusivityCurve, Vec<SecondClassStats>), EstimatorError> {
    let mut d_values = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    let mut stats = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let s = second_class_statistics(traces, t, law, rho)?;
        d_values.push(s.d_value);
        stderr.push(s.d_stderr);
        stats.push(s);
    }
    Ok((
        DiffusivityCurve {
            grid: grid.clone(),
            d_values,
            stderr,
            estimator_tag: EstimatorTag::SecondClass,
        },
        stats,
    ))
}

/// Builds the height-variance diffusivity curve with the adaptive window.
pub fn build_height_curve(
    traces: &[ReplicaTrace],
    grid: &TimeGrid,
    law: &JumpLaw,
    rho: f64,
) -> Result<DiffusivityCurve, EstimatorError> {
    let mut d_values = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let (d, se) = height_variance_diffusivity(traces, t, law, rho, definition_window(law, t))?;
        d_values.push(d);
        stderr.push(se);
    }
    Ok(DiffusivityCurve {
        grid: grid.clone(),
        d_values,
        stderr,
        estimator_tag: EstimatorTag::Height,
    })
}
