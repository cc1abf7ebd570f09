//! Event-exact thinned kinetic Monte Carlo for the exclusion process.
//!
//! Attempts arrive at rate N (one exponential clock for the whole ring, N the
//! conserved particle count). Each attempt draws, in this fixed order: the
//! waiting time, a uniform particle slot, an offset from the jump law. The
//! jump executes only if the destination is vacant; suppressed attempts
//! advance time and nothing else. This thinning reproduces the exclusion
//! generator exactly (each particle-offset pair fires at rate p(z), jumps to
//! occupied sites removed), with no time discretization anywhere: the clock
//! moves only by exponential increments or to the requested target.
//!
//! The second-class variant runs a background of first-class particles plus
//! one tracked discrepancy particle X under the basic coupling: first-class
//! jumps ignore X (landing on it swaps the pair), X jumps only onto sites
//! free of first-class particles. Attempt rate is N+1.

use rand::{Rng, RngExt};
use rand_pcg::Pcg64;
use thiserror::Error;

use crate::current::CurrentAccumulators;
use crate::law::JumpLaw;
use crate::ring::{RingConfig, RingError};
use crate::rng::{uniform_open01, unit_exponential};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("target time {target} precedes the current clock {clock}")]
    TargetInPast { target: f64, clock: f64 },
}

/// Exclusion process state: configuration, event clock, current accumulators.
#[derive(Debug, Clone)]
pub struct ExclusionState {
    pub config: RingConfig,
    pub clock: f64,
    pub acc: CurrentAccumulators,
    pub attempts: u64,
    pub accepted: u64,
}

impl ExclusionState {
    pub fn new(config: RingConfig, law: &JumpLaw, rho: f64) -> Self {
        let acc = CurrentAccumulators::new(&config, law, rho);
        ExclusionState {
            config,
            clock: 0.0,
            acc,
            attempts: 0,
            accepted: 0,
        }
    }

    /// Runs the process to `t_target` exactly.
    pub fn advance(
        &mut self,
        law: &JumpLaw,
        rng: &mut Pcg64,
        t_target: f64,
    ) -> Result<(), DynamicsError> {
        if t_target < self.clock {
            return Err(DynamicsError::TargetInPast {
                target: t_target,
                clock: self.clock,
            });
        }
        let n = self.config.particle_count();
        if n == 0 {
            self.acc.integrate(t_target - self.clock);
            self.clock = t_target;
            return Ok(());
        }
        let rate = n as f64;
        loop {
            let dt = unit_exponential(rng) / rate;
            if self.clock + dt > t_target {
                self.acc.integrate(t_target - self.clock);
                self.clock = t_target;
                return Ok(());
            }
            self.acc.integrate(dt);
            self.clock += dt;
            self.attempts += 1;
            let slot = rng.random_range(0..n);
            let z = law.offset_for_uniform(uniform_open01(rng));
            let from = self.config.particle_site(slot);
            let to = self.config.site_after_offset(from, z);
            if !self.config.occupied(to) {
                self.acc.site_flip(&self.config, from, -1);
                self.config.move_particle(from, to);
                self.acc.site_flip(&self.config, to, 1);
                self.acc.record_jump(&self.config, from, z);
                self.accepted += 1;
            }
        }
    }
}

/// Basic-coupling state: first-class background plus one second-class
/// particle X.
#[derive(Debug, Clone)]
pub struct SecondClassState {
    /// First-class particles only; never occupies `x_site`.
    pub background: RingConfig,
    pub x_site: usize,
    pub x_unwrapped: i64,
    pub clock: f64,
    pub attempts: u64,
}

impl SecondClassState {
    /// Background Bernoulli(rho) on sites 1..L-1 in ascending order (one
    /// uniform each; site 0 is left for X), X at the origin.
    pub fn sample<R: Rng>(sites: usize, rho: f64, rng: &mut R) -> Result<Self, RingError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(RingError::DegenerateDensity(rho));
        }
        let mut occupied = Vec::new();
        for site in 1..sites {
            if uniform_open01(rng) <= rho {
                occupied.push(site);
            }
        }
        Ok(SecondClassState {
            background: RingConfig::from_occupied_sites(sites, &occupied),
            x_site: 0,
            x_unwrapped: 0,
            clock: 0.0,
            attempts: 0,
        })
    }

    pub fn advance(
        &mut self,
        law: &JumpLaw,
        rng: &mut Pcg64,
        t_target: f64,
    ) -> Result<(), DynamicsError> {
        if t_target < self.clock {
            return Err(DynamicsError::TargetInPast {
                target: t_target,
                clock: self.clock,
            });
        }
        let n = self.background.particle_count();
        let rate = (n + 1) as f64;
        loop {
            let dt = unit_exponential(rng) / rate;
            if self.clock + dt > t_target {
                self.clock = t_target;
                return Ok(());
            }
            self.clock += dt;
            self.attempts += 1;
            let slot = rng.random_range(0..n + 1);
            let z = law.offset_for_uniform(uniform_open01(rng));
            if slot < n {
                let from = self.background.particle_site(slot);
                let to = self.background.site_after_offset(from, z);
                if self.background.occupied(to) {
                    continue;
                }
                if to == self.x_site {
                    // First-class displaces X back to its own origin.
                    self.background.move_particle(from, to);
                    self.x_site = from;
                    self.x_unwrapped -= z;
                } else {
                    self.background.move_particle(from, to);
                }
            } else {
                let to = self.background.site_after_offset(self.x_site, z);
                if !self.background.occupied(to) {
                    self.x_site = to;
                    self.x_unwrapped += z;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::current::CurrentAccumulators;
    use crate::law::law_from_pairs;
    use crate::ring::sample_bernoulli_config;
    use crate::rng::replica_rng;

    #[test]
    fn rejects_target_in_past() {
        let law = law_from_pairs(&[(1, 1.0)]).unwrap();
        let mut rng = replica_rng(0, 0);
        let cfg = sample_bernoulli_config(16, 0.5, &mut rng).unwrap();
        let mut state = ExclusionState::new(cfg, &law, 0.5);
        state.advance(&law, &mut rng, 1.0).unwrap();
        let err = state.advance(&law, &mut rng, the_past()).unwrap_err();
        assert!(matches!(err, DynamicsError::TargetInPast { .. }));
    }

    fn the_past() -> f64 {
        0.5
    }

    #[test]
    fn conserves_particles_and_reaches_target() {
        let law = law_from_pairs(&[(3, 1.0 / 3.0), (-1, 2.0 / 3.0)]).unwrap();
        for id in 0..10 {
            let mut rng = replica_rng(21, id);
            let cfg = sample_bernoulli_config(64, 0.4, &mut rng).unwrap();
            let n0 = cfg.particle_count();
            let mut state = ExclusionState::new(cfg, &law, 0.4);
            for t in [0.5, 1.0, 2.75, 3.0] {
                state.advance(&law, &mut rng, t).unwrap();
                assert_eq!(state.clock, t);
                assert_eq!(state.config.particle_count(), n0);
            }
            assert!(state.attempts >= state.accepted);
        }
    }

    #[test]
    fn empty_and_full_rings_advance_without_events() {
        let law = law_from_pairs(&[(1, 1.0)]).unwrap();
        let mut rng = replica_rng(1, 1);
        let mut empty = ExclusionState::new(RingConfig::empty(16), &law, 0.5);
        empty.advance(&law, &mut rng, 3.0).unwrap();
        assert_eq!(empty.clock, 3.0);
        assert_eq!(empty.attempts, 0);

        let all: Vec<usize> = (0..16).collect();
        let full_cfg = RingConfig::from_occupied_sites(16, &all);
        let mut full = ExclusionState::new(full_cfg, &law, 0.5);
        full.advance(&law, &mut rng, 3.0).unwrap();
        assert_eq!(full.clock, 3.0);
        assert_eq!(full.accepted, 0);
        assert!(full.attempts > 0);
    }

    #[test]
    fn identical_streams_reproduce_identical_trajectories() {
        let law = law_from_pairs(&[(1, 0.75), (-1, 0.25)]).unwrap();
        let run = |seed, id| {
            let mut rng = replica_rng(seed, id);
            let cfg = sample_bernoulli_config(128, 0.5, &mut rng).unwrap();
            let mut state = ExclusionState::new(cfg, &law, 0.5);
            state.advance(&law, &mut rng, 5.0).unwrap();
            (
                state.config.words().to_vec(),
                state.acc.j_integral().to_bits(),
                state.attempts,
            )
        };
        assert_eq!(run(9, 4), run(9, 4));
        assert_ne!(run(9, 4).0, run(9, 5).0);
    }

    #[test]
    fn accumulator_consistency_after_dynamics() {
        let law = law_from_pairs(&[(1, 0.75), (-1, 0.25)]).unwrap();
        let mut rng = replica_rng(30, 2);
        let cfg = sample_bernoulli_config(96, 0.3, &mut rng).unwrap();
        let mut state = ExclusionState::new(cfg, &law, 0.3);
        state.advance(&law, &mut rng, 10.0).unwrap();
        let fresh = CurrentAccumulators::new(&state.config, &law, 0.3);
        assert!(
            (state.acc.v_now() - fresh.v_now()).abs() <= 1e-8,
            "incremental v {} vs recomputed {}",
            state.acc.v_now(),
            fresh.v_now()
        );
    }

    #[test]
    fn lone_particle_jump_count_is_poisson_rate_one() {
        // A single particle never sees exclusion; accepted jumps over [0,t]
        // are Poisson(t). Mean over replicas within 5 sigma.
        let law = law_from_pairs(&[(1, 1.0)]).unwrap();
        let t = 4.0;
        let n = 4000;
        let mut total = 0u64;
        for id in 0..n {
            let mut rng = replica_rng(55, id);
            let cfg = RingConfig::from_occupied_sites(256, &[0]);
            let mut state = ExclusionState::new(cfg, &law, 0.5);
            state.advance(&law, &mut rng, t).unwrap();
            total += state.accepted;
        }
        let mean = total as f64 / n as f64;
        let se = (t / n as f64).sqrt();
        assert!((mean - t).abs() < 5.0 * se, "mean {mean} vs {t}");
    }

    #[test]
    fn second_class_background_never_holds_x_site() {
        let law = law_from_pairs(&[(1, 0.75), (-1, 0.25)]).unwrap();
        for id in 0..20 {
            let mut rng = replica_rng(61, id);
            let mut state = SecondClassState::sample(64, 0.5, &mut rng).unwrap();
            for k in 1..=5 {
                state.advance(&law, &mut rng, k as f64).unwrap();
                assert!(!state.background.occupied(state.x_site));
                // Unwrapped displacement is the wrapped site modulo L.
                assert_eq!(
                    state.x_unwrapped.rem_euclid(64),
                    state.x_site as i64
                );
            }
        }
    }

    #[test]
    fn second_class_alone_is_a_free_walk() {
        // With no background (rho -> 0 analog: empty background), X jumps at
        // rate 1 with law offsets; mean displacement is b*t.
        let law = law_from_pairs(&[(1, 0.75), (-1, 0.25)]).unwrap();
        let t = 8.0;
        let n = 4000;
        let mut sum = 0.0;
        for id in 0..n {
            let mut rng = replica_rng(62, id);
            let mut state = SecondClassState {
                background: RingConfig::empty(256),
                x_site: 0,
                x_unwrapped: 0,
                clock: 0.0,
                attempts: 0,
            };
            state.advance(&law, &mut rng, t).unwrap();
            sum += state.x_unwrapped as f64;
        }
        let mean = sum / n as f64;
        let se = (law.sigma2() * t / n as f64).sqrt();
        assert!((mean - law.drift() * t).abs() < 5.0 * se);
    }
}
