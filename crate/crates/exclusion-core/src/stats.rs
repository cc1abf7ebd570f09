//! Small statistical helpers shared by estimators, validation, and tests.

use rand::{Rng, RngExt};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean (n-1 normalization).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n as f64 - 1.0) / n as f64).sqrt())
}

/// Unbiased sample variance from plain accumulators (guarded at 0).
pub fn variance_from_sums(n: usize, sum: f64, sumsq: f64) -> f64 {
    assert!(n >= 2);
    let nf = n as f64;
    let v = (sumsq - sum * sum / nf) / (nf - 1.0);
    v.max(0.0)
}

/// Pearson chi-square test of observed counts against cell probabilities.
///
/// Cells with expected count below 5 are pooled into their left neighbor
/// before the statistic is formed. Returns (statistic, dof, p-value).
pub fn chi_square_pvalue(counts: &[u64], probs: &[f64]) -> (f64, usize, f64) {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        match pooled.last_mut() {
            Some(last) if last.1 < 5.0 => {
                last.0 += c as f64;
                last.1 += e;
            }
            _ => pooled.push((c as f64, e)),
        }
    }
    if let Some(last) = pooled.last() {
        if last.1 < 5.0 && pooled.len() >= 2 {
            let (c, e) = pooled.pop().unwrap();
            let prev = pooled.last_mut().unwrap();
            prev.0 += c;
            prev.1 += e;
        }
    }
    assert!(pooled.len() >= 2, "chi-square needs at least two cells");
    let stat: f64 = pooled
        .iter()
        .map(|&(c, e)| {
            let d = c - e;
            d * d / e
        })
        .sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64).unwrap();
    (stat, dof, 1.0 - dist.cdf(stat))
}

/// With-replacement bootstrap index draw.
pub fn bootstrap_indices<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Total variation distance between two probability vectors on the same
/// support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
