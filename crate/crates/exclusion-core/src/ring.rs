//! Bit-packed occupancy configurations on a periodic ring.
//!
//! Site y maps to bit (y % 64) of word (y / 64); bits at or above `sites` in
//! the top word stay zero. A particle index (`positions` plus reverse map
//! `slot_of`) gives O(1) uniform particle selection and O(1) moves, in
//! swap-remove order, so the set of occupied sites determines the words but
//! not the slot order.

use rand::Rng;
use thiserror::Error;

use crate::rng::uniform_open01;

#[derive(Debug, Error, PartialEq)]
pub enum RingError {
    #[error("density {0} is outside the open interval (0,1)")]
    DegenerateDensity(f64),
}

const VACANT: u32 = u32::MAX;

/// Occupancy configuration with particle index.
#[derive(Debug, Clone, PartialEq)]
pub struct RingConfig {
    sites: usize,
    words: Vec<u64>,
    positions: Vec<u32>,
    slot_of: Vec<u32>,
}

impl RingConfig {
    pub fn empty(sites: usize) -> Self {
        assert!(sites >= 1 && sites < u32::MAX as usize);
        RingConfig {
            sites,
            words: vec![0; sites.div_ceil(64)],
            positions: Vec::new(),
            slot_of: vec![VACANT; sites],
        }
    }

    pub fn from_occupied_sites(sites: usize, occupied: &[usize]) -> Self {
        let mut cfg = Self::empty(sites);
        for &site in occupied {
            cfg.insert(site);
        }
        cfg
    }

    /// Low-L constructor from a bitmask, bit y = site y. Requires sites <= 64.
    pub fn from_mask(sites: usize, mask: u64) -> Self {
        assert!(sites <= 64);
        let occupied: Vec<usize> = (0..sites).filter(|&y| mask >> y & 1 == 1).collect();
        Self::from_occupied_sites(sites, &occupied)
    }

    /// Bitmask of the configuration. Requires sites <= 64.
    pub fn to_mask(&self) -> u64 {
        assert!(self.sites <= 64);
        self.words[0]
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particle_count(&self) -> usize {
        self.positions.len()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn occupied(&self, site: usize) -> bool {
        self.words[site / 64] >> (site % 64) & 1 == 1
    }

    /// Site of the particle in a given slot (0..particle_count).
    pub fn particle_site(&self, slot: usize) -> usize {
        self.positions[slot] as usize
    }

    /// Destination of a jump by offset z from a site, wrapped.
    pub fn site_after_offset(&self, site: usize, z: i64) -> usize {
        (site as i64 + z).rem_euclid(self.sites as i64) as usize
    }

    fn insert(&mut self, site: usize) {
        assert!(!self.occupied(site), "site {site} already occupied");
        self.words[site / 64] |= 1 << (site % 64);
        self.slot_of[site] = self.positions.len() as u32;
        self.positions.push(site as u32);
    }

    /// Moves the particle at `from` to the vacant site `to`.
    pub fn move_particle(&mut self, from: usize, to: usize) {
        debug_assert!(self.occupied(from) && !self.occupied(to));
        self.words[from / 64] &= !(1 << (from % 64));
        self.words[to / 64] |= 1 << (to % 64);
        let slot = self.slot_of[from];
        self.slot_of[from] = VACANT;
        self.slot_of[to] = slot;
        self.positions[slot as usize] = to as u32;
    }
}

/// Samples a Bernoulli(rho) product configuration, one uniform per site in
/// ascending site order (the draw order is part of the reproducibility
/// contract).
pub fn sample_bernoulli_config<R: Rng>(
    sites: usize,
    rho: f64,
    rng: &mut R,
) -> Result<RingConfig, RingError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(RingError::DegenerateDensity(rho));
    }
    let mut cfg = RingConfig::empty(sites);
    for site in 0..sites {
        if uniform_open01(rng) <= rho {
            cfg.insert(site);
        }
    }
    Ok(cfg)
}

/// Centered representative of a ring coordinate, in (-L/2, L/2].
pub fn centered_site(x: usize, sites: usize) -> i64 {
    let x = x as i64;
    let l = sites as i64;
    if 2 * x <= l {
        x
    } else {
        x - l
    }
}

/// Counts sum_y a[(y+shift) mod L] * b[y] over the L-bit strings in `a`, `b`.
///
/// Fast paths cover L <= 64 and L a multiple of 64 (every ring size used by
/// the acceptance runs); other L fall back to a per-bit loop.
pub fn rotated_and_count(a: &[u64], b: &[u64], sites: usize, shift: usize) -> u32 {
    debug_assert!(shift < sites);
    if sites <= 64 {
        let mask = if sites == 64 { !0 } else { (1u64 << sites) - 1 };
        let ra = if shift == 0 {
            a[0]
        } else {
            (a[0] >> shift | a[0] << (sites - shift)) & mask
        };
        return (ra & b[0]).count_ones();
    }
    if sites % 64 == 0 {
        let n = sites / 64;
        let ws = shift / 64;
        let bs = shift % 64;
        let mut count = 0;
        for i in 0..n {
            let lo = a[(i + ws) % n];
            let rotated = if bs == 0 {
                lo
            } else {
                lo >> bs | a[(i + ws + 1) % n] << (64 - bs)
            };
            count += (rotated & b[i]).count_ones();
        }
        return count;
    }
    let bit = |w: &[u64], y: usize| w[y / 64] >> (y % 64) & 1;
    let mut count = 0;
    for y in 0..sites {
        count += (bit(a, (y + shift) % sites) & bit(b, y)) as u32;
    }
    count
}

/// All circular counts C(x) = sum_y a[(y+x) mod L] b[y] for x in 0..L.
pub fn circular_counts(a: &[u64], b: &[u64], sites: usize) -> Vec<u32> {
    (0..sites).map(|x| rotated_and_count(a, b, sites, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::stats::chi_square_pvalue;
    use statrs::distribution::{Binomial, DiscreteCDF};

    #[test]
    fn insert_move_and_masks_round_trip() {
        let mut cfg = RingConfig::from_mask(8, 0b1010_0110);
        assert_eq!(cfg.particle_count(), 4);
        assert!(cfg.occupied(1) && cfg.occupied(2) && cfg.occupied(5) && cfg.occupied(7));
        cfg.move_particle(7, 0);
        assert_eq!(cfg.to_mask(), 0b0010_0111);
        assert_eq!(cfg.particle_count(), 4);
        let sites: Vec<usize> = (0..8).filter(|&y| cfg.occupied(y)).collect();
        let rebuilt = RingConfig::from_occupied_sites(8, &sites);
        assert_eq!(rebuilt.to_mask(), cfg.to_mask());
    }

    #[test]
    fn centered_representative_interval() {
        assert_eq!(centered_site(0, 8), 0);
        assert_eq!(centered_site(4, 8), 4);
        assert_eq!(centered_site(5, 8), -3);
        assert_eq!(centered_site(7, 8), -1);
        assert_eq!(centered_site(512, 1024), 512);
        assert_eq!(centered_site(513, 1024), -511);
    }

    #[test]
    fn bernoulli_rejects_degenerate_density() {
        let mut rng = replica_rng(0, 0);
        for rho in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(
                sample_bernoulli_config(16, rho, &mut rng),
                Err(RingError::DegenerateDensity(_))
            ));
        }
    }

    #[test]
    fn bernoulli_particle_count_matches_exact_binomial() {
        // 1e4 draws at L=1e4, rho=0.5; bin N by exact binomial quantiles and
        // chi-square at significance 1e-3.
        let l = 10_000u64;
        let rho = 0.5;
        let draws = 10_000u64;
        let binom = Binomial::new(rho, l).unwrap();
        let mean = l as f64 * rho;
        let sd = (l as f64 * rho * (1.0 - rho)).sqrt();
        let mut edges: Vec<u64> = (-7..=7)
            .map(|k| (mean + k as f64 * 0.5 * sd).round() as u64)
            .collect();
        edges.dedup();
        let mut expected = Vec::with_capacity(edges.len() + 1);
        let mut counts = vec![0u64; edges.len() + 1];
        let mut prev = 0.0;
        for &e in &edges {
            let c = binom.cdf(e - 1);
            expected.push(c - prev);
            prev = c;
        }
        expected.push(1.0 - prev);
        for i in 0..draws {
            let mut rng = replica_rng(2024, i);
            let n = sample_bernoulli_config(l as usize, rho, &mut rng)
                .unwrap()
                .particle_count() as u64;
            let bin = edges.partition_point(|&e| e <= n);
            counts[bin] += 1;
        }
        let (stat, dof, p) = chi_square_pvalue(&counts, &expected);
        assert!(p > 1e-3, "chi-square {stat} at {dof} dof, p={p}");
    }

    #[test]
    fn near_empty_density_limit() {
        let mut empty = 0;
        for i in 0..1000 {
            let mut rng = replica_rng(77, i);
            let cfg = sample_bernoulli_config(10, 1e-5, &mut rng).unwrap();
            if cfg.particle_count() == 0 {
                empty += 1;
            }
        }
        // P(nonempty) ~ 1e-4 per draw; 994 leaves astronomical slack.
        assert!(empty >= 994, "{empty} empty configurations of 1000");
    }

    fn naive_count(a: &RingConfig, b: &RingConfig, shift: usize) -> u32 {
        let l = a.sites();
        (0..l)
            .filter(|&y| a.occupied((y + shift) % l) && b.occupied(y))
            .count() as u32
    }

    #[test]
    fn rotated_count_matches_naive_on_all_paths() {
        // Covers the single-word, word-aligned, and generic fallback paths.
        for &sites in &[8usize, 63, 64, 128, 192, 70, 130] {
            let mut rng = replica_rng(5, sites as u64);
            let a = sample_bernoulli_config(sites, 0.4, &mut rng).unwrap();
            let b = sample_bernoulli_config(sites, 0.6, &mut rng).unwrap();
            for shift in [0, 1, 2, sites / 3, sites / 2, sites - 1] {
                assert_eq!(
                    rotated_and_count(a.words(), b.words(), sites, shift),
                    naive_count(&a, &b, shift),
                    "sites {sites} shift {shift}"
                );
            }
        }
    }

    #[test]
    fn circular_counts_total_is_product_of_counts() {
        // sum_x C(x) counts every occupied pair once: N_a * N_b.
        let mut rng = replica_rng(6, 1);
        let a = sample_bernoulli_config(128, 0.3, &mut rng).unwrap();
        let b = sample_bernoulli_config(128, 0.5, &mut rng).unwrap();
        let total: u64 = circular_counts(a.words(), b.words(), 128)
            .iter()
            .map(|&c| c as u64)
            .sum();
        assert_eq!(
            total,
            a.particle_count() as u64 * b.particle_count() as u64
        );
    }
}
