//! Geometric observation time grids.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid start {0} must be positive and finite")]
    NonPositiveStart(f64),
    #[error("grid ratio {0} must exceed 1")]
    RatioNotAboveOne(f64),
    #[error("no grid point fits below t_max {0}")]
    EmptyRange(f64),
}

/// Observation times t0 * ratio^k for k = 0.. while <= t_max (with 1e-12
/// relative slack); no endpoint is appended.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    ratio: f64,
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t0: f64, ratio: f64, t_max: f64) -> Result<Self, GridError> {
        if !(t0 > 0.0) || !t0.is_finite() {
            return Err(GridError::NonPositiveStart(t0));
        }
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(GridError::RatioNotAboveOne(ratio));
        }
        let limit = t_max * (1.0 + 1e-12);
        let mut points = Vec::new();
        let mut k = 0;
        loop {
            let t = t0 * ratio.powi(k);
            if t > limit {
                break;
            }
            points.push(t);
            k += 1;
        }
        if points.is_empty() {
            return Err(GridError::EmptyRange(t_max));
        }
        Ok(TimeGrid { t0, ratio, points })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Index of the grid point matching t within 1e-9 relative.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points
            .iter()
            .position(|&p| (p - t).abs() <= 1e-9 * t.abs().max(1e-300))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_grid_hits_exact_times() {
        let g = TimeGrid::new(0.5, 2.0, 2.0).unwrap();
        assert_eq!(g.points(), &[0.5, 1.0, 2.0]);
        assert_eq!(g.index_of(1.0), Some(1));
        assert_eq!(g.index_of(1.5), None);
    }

    #[test]
    fn sqrt2_grid_reaches_target_with_slack() {
        let g = TimeGrid::new(1000.0 / 1024.0, std::f64::consts::SQRT_2, 1000.0).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g.last() - 1000.0).abs() < 1e-9 * 1000.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(
            TimeGrid::new(0.0, 2.0, 1.0).unwrap_err(),
            GridError::NonPositiveStart(0.0)
        );
        assert_eq!(
            TimeGrid::new(1.0, 1.0, 10.0).unwrap_err(),
            GridError::RatioNotAboveOne(1.0)
        );
        assert_eq!(
            TimeGrid::new(2.0, 2.0, 1.0).unwrap_err(),
            GridError::EmptyRange(1.0)
        );
    }

    #[test]
    fn single_point_grid() {
        let g = TimeGrid::new(5.0, 10.0, 20.0).unwrap();
        assert_eq!(g.points(), &[5.0]);
    }
}
