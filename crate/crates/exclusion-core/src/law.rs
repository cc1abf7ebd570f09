//! Finite-range jump laws.
//!
//! A jump law assigns probability weight p(z) to displacement offsets z. The
//! support must be finite, exclude 0, carry nonnegative weights, and sum to 1
//! within 1e-9. Derived quantities: range R = max |z|, drift b = sum z p(z),
//! sigma2 = sum z^2 p(z).

use std::collections::BTreeMap;
use thiserror::Error;

/// Normalization slack allowed on the weight sum.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Drift magnitude at or below which a law is flagged mean-zero.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("offset {offset} has negative weight {weight}")]
    NegativeWeight { offset: i64, weight: f64 },
    #[error("offset 0 carries weight {0}; self-jumps are excluded")]
    ZeroOffsetWeight(f64),
    #[error("weights sum to {0}, outside 1 +/- 1e-9")]
    NotNormalized(f64),
    #[error("law has no offsets")]
    EmptyLaw,
}

/// Validated jump law with precomputed sampling table and moments.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpLaw {
    offsets: Vec<i64>,
    weights: Vec<f64>,
    /// Cumulative weights normalized by the actual sum, for inverse-CDF draws.
    cumulative: Vec<f64>,
    range: i64,
    drift: f64,
    sigma2: f64,
    mean_zero: bool,
}

/// Builds a [`JumpLaw`] from an offset-to-weight map.
///
/// Offsets with exactly zero weight are dropped from the support (a law given
/// as {1: 1.0, -1: 0.0} has range 1).
pub fn build_jump_law(weights: &BTreeMap<i64, f64>) -> Result<JumpLaw, LawError> {
    let mut offsets = Vec::new();
    let mut kept = Vec::new();
    let mut total = 0.0;
    for (&z, &w) in weights {
        if w < 0.0 || !w.is_finite() {
            return Err(LawError::NegativeWeight { offset: z, weight: w });
        }
        if z == 0 && w > 0.0 {
            return Err(LawError::ZeroOffsetWeight(w));
        }
        if w > 0.0 {
            offsets.push(z);
            kept.push(w);
            total += w;
        }
    }
    if offsets.is_empty() {
        return Err(LawError::EmptyLaw);
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(LawError::NotNormalized(total));
    }
    let mut cumulative = Vec::with_capacity(kept.len());
    let mut acc = 0.0;
    for &w in &kept {
        acc += w;
        cumulative.push(acc / total);
    }
    // Force the last cell to 1 so a uniform draw of exactly 1-eps stays in range.
    *cumulative.last_mut().unwrap() = 1.0;
    let drift: f64 = offsets.iter().zip(&kept).map(|(&z, &w)| z as f64 * w).sum();
    let sigma2: f64 = offsets
        .iter()
        .zip(&kept)
        .map(|(&z, &w)| (z * z) as f64 * w)
        .sum();
    let range = offsets.iter().map(|z| z.abs()).max().unwrap();
    Ok(JumpLaw {
        offsets,
        weights: kept,
        cumulative,
        range,
        drift,
        sigma2,
        mean_zero: drift.abs() <= MEAN_ZERO_TOL,
    })
}

impl JumpLaw {
    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of a single offset, 0 if outside the support.
    pub fn weight_of(&self, z: i64) -> f64 {
        match self.offsets.iter().position(|&o| o == z) {
            Some(i) => self.weights[i],
            None => 0.0,
        }
    }

    /// Range R = max |z| over the support.
    pub fn range(&self) -> i64 {
        self.range
    }

    /// Drift b = sum z p(z).
    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Second moment sigma2 = sum z^2 p(z).
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// True for the unit totally asymmetric law p(1) = 1.
    pub fn is_unit_tasep(&self) -> bool {
        self.offsets == [1]
    }

    /// Maps a uniform draw u in [0,1) to an offset by inverse CDF over the
    /// support in ascending offset order.
    pub fn offset_for_uniform(&self, u: f64) -> i64 {
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.offsets[i.min(self.offsets.len() - 1)]
    }

    /// Ring-averaged second moment of the normalized flux,
    /// sum_z p(z)^2 + sum_z p(z)p(-z). Density-independent.
    pub fn flux_inner_product(&self) -> f64 {
        let direct: f64 = self.weights.iter().map(|w| w * w).sum();
        let mirrored: f64 = self
            .offsets
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * self.weight_of(-z))
            .sum();
        direct + mirrored
    }

    /// Smallest ring size whose boundary stays outside the correlation light
    /// cone up to time t on both sides: 2(R t + 6 sqrt(sigma2 t)) + 2R.
    pub fn min_sites(&self, t: f64) -> usize {
        let r = self.range as f64;
        (2.0 * (r * t + 6.0 * (self.sigma2 * t).sqrt()) + 2.0 * r).ceil() as usize
    }

    /// Canonical id string, offsets ascending, used in golden files and
    /// manifests. Example: "1:0.75,-1:0.25" sorts to "-1:0.25,1:0.75".
    pub fn id_string(&self) -> String {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| format!("{z}:{w}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Convenience constructor used throughout the tests.
pub fn law_from_pairs(pairs: &[(i64, f64)]) -> Result<JumpLaw, LawError> {
    let mut map = BTreeMap::new();
    for &(z, w) in pairs {
        map.insert(z, w);
    }
    build_jump_law(&map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tasep_law_moments() {
        let law = law_from_pairs(&[(1, 1.0)]).unwrap();
        assert_eq!(law.range(), 1);
        assert_eq!(law.drift(), 1.0);
        assert_eq!(law.sigma2(), 1.0);
        assert!(!law.is_mean_zero());
        assert!(law.is_unit_tasep());
        assert_eq!(law.flux_inner_product(), 1.0);
    }

    #[test]
    fn asymmetric_nearest_neighbor_moments() {
        let law = law_from_pairs(&[(1, 0.75), (-1, 0.25)]).unwrap();
        assert!((law.drift() - 0.5).abs() < 1e-15);
        assert!((law.sigma2() - 1.0).abs() < 1e-15);
        assert!(!law.is_mean_zero());
        assert!(!law.is_unit_tasep());
        // 0.75^2 + 0.25^2 + 2 * 0.75 * 0.25 = 1.
        assert!((law.flux_inner_product() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn long_range_law_moments() {
        let law = law_from_pairs(&[(3, 1.0 / 3.0), (-1, 2.0 / 3.0)]).unwrap();
        assert_eq!(law.range(), 3);
        assert!((law.drift() - 1.0 / 3.0).abs() < 1e-15);
        assert!((law.sigma2() - 11.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_law_is_mean_zero() {
        let law = law_from_pairs(&[(1, 0.5), (-1, 0.5)]).unwrap();
        assert!(law.is_mean_zero());
        assert_eq!(law.drift(), 0.0);
        // 2(0.5^2) direct plus 2(0.5 * 0.5) mirrored.
        assert!((law.flux_inner_product() - 1.0).abs() < 1e-15);
        // No mirrored term when no offset pairs with its negation.
        let skew = law_from_pairs(&[(2, 0.5), (-1, 0.5)]).unwrap();
        assert!((skew.flux_inner_product() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_weight() {
        let err = law_from_pairs(&[(1, 1.25), (-1, -0.25)]).unwrap_err();
        assert!(matches!(err, LawError::NegativeWeight { offset: -1, .. }));
    }

    #[test]
    fn rejects_zero_offset_weight() {
        let err = law_from_pairs(&[(0, 0.5), (1, 0.5)]).unwrap_err();
        assert_eq!(err, LawError::ZeroOffsetWeight(0.5));
    }

    #[test]
    fn rejects_unnormalized() {
        let err = law_from_pairs(&[(1, 0.7), (-1, 0.2)]).unwrap_err();
        assert!(matches!(err, LawError::NotNormalized(s) if (s - 0.9).abs() < 1e-12));
    }

    #[test]
    fn rejects_empty_and_all_zero() {
        assert_eq!(law_from_pairs(&[]).unwrap_err(), LawError::EmptyLaw);
        assert_eq!(law_from_pairs(&[(2, 0.0)]).unwrap_err(), LawError::EmptyLaw);
    }

    #[test]
    fn slack_inside_tolerance_is_accepted() {
        let law = law_from_pairs(&[(1, 0.5 + 4e-10), (-1, 0.5)]).unwrap();
        assert!((law.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn offset_sampling_hits_support_boundaries() {
        let law = law_from_pairs(&[(1, 0.75), (-1, 0.25)]).unwrap();
        assert_eq!(law.offset_for_uniform(0.0), -1);
        assert_eq!(law.offset_for_uniform(0.2499), -1);
        assert_eq!(law.offset_for_uniform(0.25), 1);
        assert_eq!(law.offset_for_uniform(0.999999), 1);
    }

    #[test]
    fn id_string_is_canonical() {
        let law = law_from_pairs(&[(1, 0.75), (-1, 0.25)]).unwrap();
        assert_eq!(law.id_string(), "-1:0.25,1:0.75");
        let tasep = law_from_pairs(&[(1, 1.0)]).unwrap();
        assert_eq!(tasep.id_string(), "1:1");
    }

    #[test]
    fn min_sites_grows_with_horizon() {
        let law = law_from_pairs(&[(1, 1.0)]).unwrap();
        assert!(law.min_sites(0.5) <= 12);
        assert!(law.min_sites(2.0) > law.min_sites(0.5));
        // The rule evaluated by hand: 2(t + 6 sqrt t) + 2 at t=1 is 2(7)+2=16.
        assert_eq!(law.min_sites(1.0), 16);
    }
}
