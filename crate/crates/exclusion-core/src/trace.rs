//! Per-replica trajectory records captured at grid times.
//!
//! A trace snapshots exactly what the estimators need: the occupancy words
//! (two-point correlations against the retained initial words), the
//! integrated normalized flux (Green-Kubo), and the signed particle count
//! across the reference bond (height route). Everything else is recomputed
//! from these.

use crate::ring::RingConfig;

/// One grid-time snapshot of a replica.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub time: f64,
    /// Occupancy bitmask words at `time`.
    pub words: Vec<u64>,
    /// Integral of the normalized flux over [0, time].
    pub j_integral: f64,
    /// Net signed jumps across the bond between sites 0 and 1 up to `time`.
    pub bond0: i64,
}

/// Full record of one exclusion replica.
#[derive(Debug, Clone)]
pub struct ReplicaTrace {
    pub replica: u64,
    pub sites: usize,
    pub particles: usize,
    /// Occupancy words at time zero.
    pub initial_words: Vec<u64>,
    pub rows: Vec<TraceRow>,
    pub attempts: u64,
    pub accepted: u64,
}

/// Full record of one coupled second-class replica.
#[derive(Debug, Clone)]
pub struct SecondClassTrace {
    pub replica: u64,
    pub sites: usize,
    /// Background particle count (excludes the tracked particle).
    pub particles: usize,
    pub times: Vec<f64>,
    pub x_sites: Vec<usize>,
    pub x_unwrapped: Vec<i64>,
    pub attempts: u64,
}

impl ReplicaTrace {
    pub fn row_at(&self, time: f64) -> Option<&TraceRow> {
        self.rows
            .iter()
            .find(|r| (r.time - time).abs() <= 1e-9 * time.max(1.0))
    }
}

impl RingConfig {
    /// Snapshot helper: clones the word mask for a trace row.
    pub fn words_owned(&self) -> Vec<u64> {
        self.words().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_lookup_matches_on_relative_tolerance() {
        let trace = ReplicaTrace {
            replica: 3,
            sites: 8,
            particles: 4,
            initial_words: vec![0b1111],
            attempts: 0,
            accepted: 0,
            rows: vec![
                TraceRow {
                    time: 0.5,
                    words: vec![0b1111],
                    j_integral: 0.0,
                    bond0: 0,
                },
                TraceRow {
                    time: 1000.0,
                    words: vec![0b1111],
                    j_integral: 1.0,
                    bond0: 2,
                },
            ],
        };
        assert!(trace.row_at(0.5).is_some());
        assert!(trace.row_at(1000.0 + 1e-7).is_some());
        assert!(trace.row_at(0.75).is_none());
    }
}
