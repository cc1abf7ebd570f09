//! Randomized invariant checks across the core building blocks.

use proptest::prelude::*;

use exclusion_core::dynamics::ExclusionState;
use exclusion_core::ensemble::{run_ensemble, SimParams};
use exclusion_core::estimators::estimate_two_point;
use exclusion_core::grid::TimeGrid;
use exclusion_core::law::{law_from_pairs, JumpLaw};
use exclusion_core::ring::{
    centered_site, circular_counts, rotated_and_count, sample_bernoulli_config, RingConfig,
};
use exclusion_core::rng::replica_rng;

fn arb_law() -> impl Strategy<Value = JumpLaw> {
    proptest::collection::btree_map(
        (-3i64..=3).prop_filter("offset must be nonzero", |z| *z != 0),
        0.05f64..1.0,
        1..4,
    )
    .prop_map(|m| {
        let total: f64 = m.values().sum();
        let pairs: Vec<(i64, f64)> = m.into_iter().map(|(z, w)| (z, w / total)).collect();
        law_from_pairs(&pairs).expect("normalized law")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn law_moments_are_consistent(law in arb_law(), u in 0.0f64..1.0) {
        let b = law.drift();
        let r = law.range() as f64;
        prop_assert!(b.abs() <= r + 1e-12);
        // Jensen: second moment dominates squared mean.
        prop_assert!(law.sigma2() + 1e-12 >= b * b);
        let z = law.offset_for_uniform(u.max(1e-12));
        prop_assert!(law.offsets().contains(&z));
    }

    #[test]
    fn offset_sampling_is_monotone_in_the_uniform(law in arb_law()) {
        let mut last = i64::MIN;
        for k in 1..=200 {
            let z = law.offset_for_uniform(k as f64 / 200.0);
            prop_assert!(z >= last);
            last = z;
        }
    }

    #[test]
    fn centered_site_is_congruent_and_bounded(sites in 2usize..200, x in 0usize..200) {
        let x = x % sites;
        let c = centered_site(x, sites);
        let l = sites as i64;
        prop_assert_eq!(c.rem_euclid(l), x as i64);
        // The representative lives in (-L/2, L/2].
        prop_assert!(2 * c > -l && 2 * c <= l);
    }

    #[test]
    fn rotated_count_matches_naive(sites in 2usize..130, seed in any::<u64>(), shift in 0usize..130) {
        let shift = shift % sites;
        let mut rng = replica_rng(seed, 0);
        let a = sample_bernoulli_config(sites, 0.4, &mut rng).unwrap();
        let b = sample_bernoulli_config(sites, 0.6, &mut rng).unwrap();
        let naive: u32 = (0..sites)
            .map(|y| (a.occupied((y + shift) % sites) && b.occupied(y)) as u32)
            .sum();
        prop_assert_eq!(rotated_and_count(a.words(), b.words(), sites, shift), naive);
        let all = circular_counts(a.words(), b.words(), sites);
        prop_assert_eq!(all[shift], naive);
    }

    #[test]
    fn dynamics_conserve_particles(
        law in arb_law(),
        seed in any::<u64>(),
        rho in 0.1f64..0.9,
        sites in 16usize..48,
        t in 0.1f64..2.0,
    ) {
        let mut rng = replica_rng(seed, 1);
        let cfg = sample_bernoulli_config(sites, rho, &mut rng).unwrap();
        let n0 = cfg.particle_count();
        let mut state = ExclusionState::new(cfg, &law, rho);
        state.advance(&law, &mut rng, t).unwrap();
        prop_assert_eq!(state.config.particle_count(), n0);
        prop_assert!((state.clock - t).abs() < 1e-12);
        prop_assert!(state.accepted <= state.attempts);
    }

    #[test]
    fn occupancy_stays_exclusive(seed in any::<u64>(), sites in 8usize..40) {
        let law = law_from_pairs(&[(2, 0.5), (-1, 0.5)]).unwrap();
        let mut rng = replica_rng(seed, 2);
        let cfg = sample_bernoulli_config(sites, 0.5, &mut rng).unwrap();
        let mut state = ExclusionState::new(cfg, &law, 0.5);
        state.advance(&law, &mut rng, 1.0).unwrap();
        // Bit-packing cannot double-occupy, but slot bookkeeping could drift:
        // every listed particle must sit on an occupied site, each site once.
        let n = state.config.particle_count();
        let mut seen = vec![false; sites];
        for slot in 0..n {
            let s = state.config.particle_site(slot);
            prop_assert!(state.config.occupied(s));
            prop_assert!(!seen[s]);
            seen[s] = true;
        }
    }

    #[test]
    fn covariance_sum_identity_holds_for_every_replica(
        law in arb_law(),
        seed in any::<u64>(),
        rho in 0.2f64..0.8,
    ) {
        let params = SimParams {
            law: law.clone(),
            rho,
            sites: 64,
            grid: TimeGrid::new(0.5, 2.0, 1.0).unwrap(),
            replicas: 6,
            master_seed: seed,
        };
        let traces = run_ensemble(&params, 1);
        for &t in params.grid.points() {
            let est = estimate_two_point(&traces, t, rho).unwrap();
            prop_assert!(est.max_identity_deviation <= 1e-10);
        }
    }
}

#[test]
fn ring_masks_round_trip() {
    for mask in [0u64, 1, 0b1010, 0xff, 0b100101] {
        let cfg = RingConfig::from_mask(8, mask);
        assert_eq!(cfg.to_mask(), mask);
        assert_eq!(cfg.particle_count(), mask.count_ones() as usize);
    }
}
