//! Replica orchestration: run many independent realizations and collect
//! their traces in replica order.
//!
//! Determinism contract: replica r of a run is a pure function of
//! (master_seed, r) through its dedicated RNG stream, so the collected
//! trace vector is identical for any worker count. All floating-point
//! reduction happens downstream in estimators, which consume traces in
//! replica order; nothing here depends on scheduling.

use crate::dynamics::{ExclusionState, SecondClassState};
use crate::grid::TimeGrid;
use crate::law::JumpLaw;
use crate::ring::sample_bernoulli_config;
use crate::rng::replica_rng;
use crate::trace::{ReplicaTrace, SecondClassTrace, TraceRow};

/// Parameters of one ensemble run.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub law: JumpLaw,
    pub rho: f64,
    pub sites: usize,
    pub grid: TimeGrid,
    pub replicas: u64,
    pub master_seed: u64,
}

/// Simulates one replica and records a row at every grid time.
pub fn simulate_replica(params: &SimParams, replica: u64) -> ReplicaTrace {
    let mut rng = replica_rng(params.master_seed, replica);
    let config = sample_bernoulli_config(params.sites, params.rho, &mut rng)
        .expect("density validated at config construction");
    let initial_words = config.words_owned();
    let particles = config.particle_count();
    let mut state = ExclusionState::new(config, &params.law, params.rho);
    let mut rows = Vec::with_capacity(params.grid.len());
    for &t in params.grid.points() {
        state
            .advance(&params.law, &mut rng, t)
            .expect("grid times increase");
        rows.push(TraceRow {
            time: t,
            words: state.config.words_owned(),
            j_integral: state.acc.j_integral(),
            bond0: state.acc.bond_count(0),
        });
    }
    ReplicaTrace {
        replica,
        sites: params.sites,
        particles,
        initial_words,
        rows,
        attempts: state.attempts,
        accepted: state.accepted,
    }
}

/// Simulates one basic-coupled replica tracking the discrepancy particle.
pub fn simulate_second_class_replica(params: &SimParams, replica: u64) -> SecondClassTrace {
    let mut rng = replica_rng(params.master_seed, replica);
    let mut state = SecondClassState::sample(params.sites, params.rho, &mut rng)
        .expect("density validated at config construction");
    let particles = state.background.particle_count();
    let mut times = Vec::with_capacity(params.grid.len());
    let mut x_sites = Vec::with_capacity(params.grid.len());
    let mut x_unwrapped = Vec::with_capacity(params.grid.len());
    for &t in params.grid.points() {
        state
            .advance(&params.law, &mut rng, t)
            .expect("grid times increase");
        times.push(t);
        x_sites.push(state.x_site);
        x_unwrapped.push(state.x_unwrapped);
    }
    SecondClassTrace {
        replica,
        sites: params.sites,
        particles,
        times,
        x_sites,
        x_unwrapped,
        attempts: state.attempts,
    }
}

fn run_indexed<T, F>(replicas: u64, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    if workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool construction");
        return pool.install(|| (0..replicas).into_par_iter().map(&job).collect());
    }
    let _ = workers;
    (0..replicas).map(job).collect()
}

/// Runs the full ensemble; output order is replica order regardless of
/// `workers`.
pub fn run_ensemble(params: &SimParams, workers: usize) -> Vec<ReplicaTrace> {
    run_indexed(params.replicas, workers, |r| simulate_replica(params, r))
}

/// Runs the coupled ensemble; output order is replica order regardless of
/// `workers`.
pub fn run_second_class_ensemble(params: &SimParams, workers: usize) -> Vec<SecondClassTrace> {
    run_indexed(params.replicas, workers, |r| {
        simulate_second_class_replica(params, r)
    })
}
