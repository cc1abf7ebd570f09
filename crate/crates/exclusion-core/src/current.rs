//! Current accumulators maintained event by event.
//!
//! Tracks the ring-summed normalized flux
//!   v_now = (1/chi) sum_z p(z) sum_x (eta_{x+z} - rho)(eta_x - rho),
//! its time integral j_integral, and per-bond signed jump counts. The pair
//! sums m_z = sum_x eta_x eta_{x+z} are integers updated exactly on each site
//! flip (the flip delta touches only m_z terms containing the flipped site,
//! which contribute delta * (eta_{s+z} + eta_{s-z})), so v_now never drifts
//! from the from-scratch value: sum_x (eta_{x+z}-rho)(eta_x-rho) =
//! m_z - 2 rho N + rho^2 L with N conserved.
//!
//! Requires L >= 2R+2 so that s+z, s-z, s are pairwise distinct mod L for
//! every support offset z; the exact flip delta relies on it.

use crate::law::JumpLaw;
use crate::ring::{rotated_and_count, RingConfig};

#[derive(Debug, Clone)]
pub struct CurrentAccumulators {
    rho: f64,
    chi: f64,
    sites: i64,
    particles: i64,
    offsets: Vec<i64>,
    weights: Vec<f64>,
    pair_counts: Vec<i64>,
    v_now: f64,
    j_integral: f64,
    bond_counts: Vec<i64>,
}

impl CurrentAccumulators {
    pub fn new(cfg: &RingConfig, law: &JumpLaw, rho: f64) -> Self {
        let sites = cfg.sites() as i64;
        assert!(
            sites >= 2 * law.range() + 2,
            "ring of {} sites is too small for range {}",
            sites,
            law.range()
        );
        let pair_counts: Vec<i64> = law
            .offsets()
            .iter()
            .map(|&z| {
                let shift = z.rem_euclid(sites) as usize;
                rotated_and_count(cfg.words(), cfg.words(), cfg.sites(), shift) as i64
            })
            .collect();
        let mut acc = CurrentAccumulators {
            rho,
            chi: rho * (1.0 - rho),
            sites,
            particles: cfg.particle_count() as i64,
            offsets: law.offsets().to_vec(),
            weights: law.weights().to_vec(),
            pair_counts,
            v_now: 0.0,
            j_integral: 0.0,
            bond_counts: vec![0; cfg.sites()],
        };
        acc.refresh_v();
        acc
    }

    fn refresh_v(&mut self) {
        let n = self.particles as f64;
        let l = self.sites as f64;
        let mut v = 0.0;
        for (w, &m) in self.weights.iter().zip(&self.pair_counts) {
            v += w * (m as f64 - 2.0 * self.rho * n + self.rho * self.rho * l);
        }
        self.v_now = v / self.chi;
    }

    /// Applies one occupancy flip at `site` (delta +1 or -1). `cfg` must hold
    /// the neighbor occupancies current at the moment of the flip; whether
    /// `site`'s own bit is already flipped does not matter.
    pub fn site_flip(&mut self, cfg: &RingConfig, site: usize, delta: i64) {
        for (i, &z) in self.offsets.iter().enumerate() {
            let up = cfg.site_after_offset(site, z);
            let down = cfg.site_after_offset(site, -z);
            let neighbors = cfg.occupied(up) as i64 + cfg.occupied(down) as i64;
            self.pair_counts[i] += delta * neighbors;
        }
        self.particles += delta;
        self.refresh_v();
    }

    /// Records the bond crossings of an accepted jump from `from` by offset z.
    pub fn record_jump(&mut self, cfg: &RingConfig, from: usize, z: i64) {
        if z > 0 {
            for k in 0..z {
                let bond = cfg.site_after_offset(from, k);
                self.bond_counts[bond] += 1;
            }
        } else {
            for k in 1..=(-z) {
                let bond = cfg.site_after_offset(from, -k);
                self.bond_counts[bond] -= 1;
            }
        }
    }

    /// Advances the time integral across an interval with no events:
    /// j_integral gains exactly v_now * dt (so |increment| <= |v_now| * dt).
    pub fn integrate(&mut self, dt: f64) {
        self.j_integral += self.v_now * dt;
    }

    pub fn v_now(&self) -> f64 {
        self.v_now
    }

    pub fn j_integral(&self) -> f64 {
        self.j_integral
    }

    pub fn bond_count(&self, bond: usize) -> i64 {
        self.bond_counts[bond]
    }

    pub fn bond_counts(&self) -> &[i64] {
        &self.bond_counts
    }
}
