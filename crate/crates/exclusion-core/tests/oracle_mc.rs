//! Monte Carlo dynamics checked against the exact small-ring solver.

use exclusion_core::dynamics::{ExclusionState, SecondClassState};
use exclusion_core::ensemble::{run_ensemble, run_second_class_ensemble, SimParams};
use exclusion_core::estimators::{estimate_two_point, second_class_statistics};
use exclusion_core::grid::TimeGrid;
use exclusion_core::law::law_from_pairs;
use exclusion_core::oracle::OracleModel;
use exclusion_core::ring::{rotated_and_count, RingConfig};
use exclusion_core::rng::replica_rng;
use exclusion_core::stats::chi_square_pvalue;

/// Whole-chain law test: evolve a fixed configuration many times and compare
/// the empirical state distribution with the uniformized semigroup row.
#[test]
fn fixed_start_state_distribution_matches_semigroup() {
    let sites = 6;
    let law = law_from_pairs(&[(1, 0.75), (-1, 0.25)]).unwrap();
    let model = OracleModel::new(sites, &law, 0.5).unwrap();
    let s0: u32 = 0b010101;
    let t = 0.7;
    let exact = model.distribution_from_state(s0, t);

    let replicas = 4000u64;
    let mut counts = vec![0u64; 1 << sites];
    for r in 0..replicas {
        let mut rng = replica_rng(0xD15C0, r);
        let cfg = RingConfig::from_mask(sites, s0 as u64);
        let mut state = ExclusionState::new(cfg, &law, 0.5);
        state.advance(&law, &mut rng, t).unwrap();
        counts[state.config.to_mask() as usize] += 1;
    }

    let (stat, dof, p) = chi_square_pvalue(&counts, &exact);
    assert!(
        p > 1e-4,
        "state distribution drifted: chi2={stat:.2} dof={dof} p={p:.2e}"
    );
    // And unreachable states (different particle number) never occur.
    for (mask, &c) in counts.iter().enumerate() {
        if (mask as u32).count_ones() != s0.count_ones() {
            assert_eq!(c, 0, "mask {mask:b} has wrong particle number");
        }
    }
}

/// The covariance estimated from the ensemble matches the exact evolution
/// within Monte Carlo error at every lattice site.
#[test]
fn ensemble_covariance_matches_exact_evolution() {
    let sites = 8;
    let law = law_from_pairs(&[(1, 1.0)]).unwrap();
    let rho = 0.5;
    let model = OracleModel::new(sites, &law, rho).unwrap();
    let params = SimParams {
        law: law.clone(),
        rho,
        sites,
        grid: TimeGrid::new(0.5, 2.0, 1.0).unwrap(),
        replicas: 20_000,
        master_seed: 0xACE5,
    };
    let traces = run_ensemble(&params, 1);
    for &t in params.grid.points() {
        let est = estimate_two_point(&traces, t, rho).unwrap();
        let exact = model.exact_two_point(t);
        for x in 0..sites {
            let dev = (est.s_values[x] - exact[x]).abs();
            assert!(
                dev <= 4.0 * est.stderr[x],
                "t={t} x={x}: {} vs {} (se {})",
                est.s_values[x],
                exact[x],
                est.stderr[x]
            );
        }
    }
}

/// The tagged-discrepancy walker reproduces the covariance profile:
/// its position law equals S(x,t)/chi. Total variation is held against a
/// parametric-bootstrap null calibrated from the exact law itself.
#[test]
fn second_class_position_law_matches_covariance_profile() {
    let sites = 8;
    let law = law_from_pairs(&[(1, 1.0)]).unwrap();
    let rho = 0.5;
    let chi = rho * (1.0 - rho);
    let t = 1.0;
    let model = OracleModel::new(sites, &law, rho).unwrap();
    let exact: Vec<f64> = model.exact_two_point(t).iter().map(|s| s / chi).collect();

    let replicas = 4000u64;
    let params = SimParams {
        law: law.clone(),
        rho,
        sites,
        grid: TimeGrid::new(1.0, 2.0, 1.0).unwrap(),
        replicas,
        master_seed: 0xB0B,
    };
    let traces = run_second_class_ensemble(&params, 1);
    let stats = second_class_statistics(&traces, t, &law, rho).unwrap();
    let tv_obs: f64 = stats
        .histogram
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / 2.0;

    // Null distribution of the TV statistic at this replica count.
    let mut cumulative = Vec::with_capacity(sites);
    let mut acc = 0.0;
    for &q in &exact {
        acc += q;
        cumulative.push(acc);
    }
    let mut rng = replica_rng(0xCA11B, 7);
    let boots = 200;
    let mut tvs = Vec::with_capacity(boots);
    for _ in 0..boots {
        let mut counts = vec![0.0f64; sites];
        for _ in 0..replicas {
            let u: f64 = exclusion_core::rng::uniform_open01(&mut rng) * acc;
            let k = cumulative.partition_point(|&c| c < u).min(sites - 1);
            counts[k] += 1.0;
        }
        let tv: f64 = counts
            .iter()
            .zip(&exact)
            .map(|(c, q)| (c / replicas as f64 - q).abs())
            .sum::<f64>()
            / 2.0;
        tvs.push(tv);
    }
    let mean: f64 = tvs.iter().sum::<f64>() / boots as f64;
    let sd: f64 =
        (tvs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (boots as f64 - 1.0)).sqrt();
    assert!(
        tv_obs <= mean + 4.0 * sd,
        "TV {tv_obs:.4} vs null {mean:.4} +- {sd:.4}"
    );
}

/// A second-class walker on a half-filled ring has zero mean displacement by
/// symmetry of the background; the estimator must agree.
#[test]
fn second_class_mean_displacement_is_centered() {
    let law = law_from_pairs(&[(1, 1.0)]).unwrap();
    let params = SimParams {
        law: law.clone(),
        rho: 0.5,
        sites: 64,
        grid: TimeGrid::new(2.0, 2.0, 2.0).unwrap(),
        replicas: 4000,
        master_seed: 0xFACE,
    };
    let traces = run_second_class_ensemble(&params, 1);
    let stats = second_class_statistics(&traces, 2.0, &law, 0.5).unwrap();
    assert!(
        stats.mean_displacement.abs() <= 4.0 * stats.mean_displacement_stderr,
        "mean {} se {}",
        stats.mean_displacement,
        stats.mean_displacement_stderr
    );
}

fn buggy_wrap_count(a: &[u64], b: &[u64], sites: usize, shift: usize) -> u32 {
    let word = |w: &[u64], i: usize| w[i / 64] >> (i % 64) & 1;
    let mut c = 0;
    for y in 0..sites {
        // Deliberate defect: indices that wrap land one site too far.
        let idx = if y + shift >= sites {
            (y + shift - sites + 1) % sites
        } else {
            y + shift
        };
        c += (word(a, idx) & word(b, y)) as u32;
    }
    c
}

/// Negative control for the conservation identity: an off-by-one in the wrap
/// arithmetic must produce a deterministic, detectable violation, proving the
/// identity check has teeth.
#[test]
fn wrap_off_by_one_breaks_the_conservation_identity() {
    let sites = 32;
    let law = law_from_pairs(&[(1, 1.0)]).unwrap();
    let rho = 0.5;
    let params = SimParams {
        law: law.clone(),
        rho,
        sites,
        grid: TimeGrid::new(1.0, 2.0, 1.0).unwrap(),
        replicas: 16,
        master_seed: 0xBADBAD,
    };
    let traces = run_ensemble(&params, 1);
    let est = estimate_two_point(&traces, 1.0, rho).unwrap();
    assert!(est.max_identity_deviation <= 1e-10);

    let mut worst = 0.0f64;
    for trace in &traces {
        let row = trace.row_at(1.0).unwrap();
        let n = trace.particles as f64;
        let l = sites as f64;
        let offset = -2.0 * rho * n + rho * rho * l;
        let mut total_good = 0.0;
        let mut total_bad = 0.0;
        for x in 0..sites {
            let good = rotated_and_count(&row.words, &trace.initial_words, sites, x) as f64;
            let bad = buggy_wrap_count(&row.words, &trace.initial_words, sites, x) as f64;
            total_good += (good + offset) / l;
            total_bad += (bad + offset) / l;
        }
        let expected = (n - rho * l) * (n - rho * l) / l;
        assert!((total_good - expected).abs() <= 1e-10);
        worst = worst.max((total_bad - expected).abs());
    }
    assert!(
        worst > 1e-6,
        "mutated wrap arithmetic escaped detection: worst deviation {worst:.2e}"
    );
}

/// Second-class dynamics degenerate to plain exclusion dynamics for the
/// background: marginal occupancy statistics stay Bernoulli-consistent.
#[test]
fn second_class_background_density_is_preserved() {
    let law = law_from_pairs(&[(2, 0.3), (1, 0.4), (-1, 0.3)]).unwrap();
    let sites = 48;
    let rho = 0.4;
    let mut occupied_total = 0usize;
    let replicas = 600u64;
    for r in 0..replicas {
        let mut rng = replica_rng(0x5ec0, r);
        let mut st = SecondClassState::sample(sites, rho, &mut rng).unwrap();
        st.advance(&law, &mut rng, 1.5).unwrap();
        occupied_total += st.background.particle_count();
    }
    let mean = occupied_total as f64 / replicas as f64;
    let expect = (sites - 1) as f64 * rho;
    let sd = ((sites - 1) as f64 * rho * (1.0 - rho) / replicas as f64).sqrt();
    assert!(
        (mean - expect).abs() <= 5.0 * sd,
        "background particle count {mean} vs {expect} (sd {sd})"
    );
}
