//! Laboratory for finite-range exclusion processes on a periodic ring.
//!
//! The crate has three layers:
//!
//! * process layer: jump laws, bit-packed ring configurations, deterministic
//!   per-replica RNG streams, and an event-exact thinned kinetic Monte Carlo
//!   engine with current accumulators and a second-class-particle variant
//!   ([`law`], [`ring`], [`rng`], [`current`], [`dynamics`], [`grid`],
//!   [`trace`], [`ensemble`]);
//! * oracle layer: exact finite-ring computations (sparse generator,
//!   uniformized semigroup, resolvent with residual certificate, ring-averaged
//!   inner products) used to validate the sampler ([`oracle`]);
//! * analysis layer: two-point and diffusivity estimators along four routes,
//!   sum-rule diagnostics, Laplace-domain scaling and power-law fits
//!   ([`estimators`], [`scaling`], [`stats`]).
//!
//! Replica execution is data-parallel (rayon) behind the default `parallel`
//! feature with an always-compiled sequential fallback; both paths reduce
//! replicas in a fixed chunk order so outputs are byte-identical for any
//! worker count.

pub mod current;
pub mod dynamics;
pub mod ensemble;
pub mod estimators;
pub mod grid;
pub mod law;
pub mod oracle;
pub mod ring;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod trace;
