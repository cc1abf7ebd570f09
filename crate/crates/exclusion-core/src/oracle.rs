//! Exact finite-state reference for small rings.
//!
//! For L <= 12 sites the full 2^L-state Markov generator fits comfortably in
//! memory, so every statistical estimate in this crate can be checked against
//! quantities computed to controlled numerical tolerance with no sampling
//! error. The generator is stored sparse (CSR); the semigroup e^{tQ} acts by
//! uniformization (Poisson-weighted powers of the stochastic matrix
//! P = I + Q/Lambda, explicit truncation bound); resolvents are computed by a
//! geometric Neumann series with a residual certificate.
//!
//! Conventions: state index is the occupancy bitmask (bit y = site y). The
//! normalized flux observable is
//!   w_x(eta) = (1/chi) sum_z p(z) (eta_{x+z} - rho)(eta_x - rho),
//! and the double angle inner product sums all ring shifts:
//!   <<phi, psi>> = sum_x E_pi[phi . tau_x psi].

use thiserror::Error;

use crate::law::JumpLaw;
use crate::ring::centered_site;

const EXPM_TAIL: f64 = 1e-13;
const EXPM_TERM: f64 = 1e-12;
const RESOLVENT_RTOL: f64 = 1e-9;
const QUAD_RTOL: f64 = 1e-8;
const MEAN_ZERO_RTOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{sites} sites exceeds the exact-enumeration cap of 12")]
    TooLarge { sites: usize },
    #[error("{sites} sites is below the minimum ring of 2")]
    TooSmall { sites: usize },
    #[error("function has mean {mean:e} under the product measure; not mean-zero")]
    NotMeanZero { mean: f64 },
    #[error("resolvent residual {residual:e} exceeds tolerance after {iterations} iterations")]
    SolveFailed { residual: f64, iterations: usize },
    #[error("quadrature did not reach relative tolerance {rtol:e} within the panel cap")]
    QuadratureFailure { rtol: f64 },
    #[error("light cone at t={t} does not fit a ring of {sites} sites")]
    WrapDominated { t: f64, sites: usize },
}

/// Resolvent solve result with its accuracy certificate.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub u: Vec<f64>,
    /// Max-norm of (lambda - Q)u - w, relative to the max-norm of w.
    pub residual_rel: f64,
    pub iterations: usize,
}

/// One row of the integrated-current-vs-resolvent comparison report.
#[derive(Debug, Clone)]
pub struct Lemma21Row {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub violation: bool,
}

/// Exact generator of the exclusion process on a small ring.
#[derive(Debug, Clone)]
pub struct OracleModel {
    sites: usize,
    n_states: usize,
    law: JumpLaw,
    rho: f64,
    chi: f64,
    mask: u32,
    pi: Vec<f64>,
    row_ptr: Vec<u32>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
    /// Uniformization rate: max exit rate over states.
    lambda_max: f64,
}

#[derive(Clone, Copy)]
enum Side {
    /// Gather: (Qv)[s] = sum_s' Q[s,s'] v[s'] (action on functions).
    Right,
    /// Scatter: (vQ)[s'] = sum_s v[s] Q[s,s'] (action on measures).
    Left,
}

fn bit(s: u32, x: usize) -> f64 {
    ((s >> x) & 1) as f64
}

impl OracleModel {
    pub fn new(sites: usize, law: &JumpLaw, rho: f64) -> Result<Self, OracleError> {
        if sites > 12 {
            return Err(OracleError::TooLarge { sites });
        }
        if sites < 2 {
            return Err(OracleError::TooSmall { sites });
        }
        let n_states = 1usize << sites;
        let mask = (n_states - 1) as u32;
        let chi = rho * (1.0 - rho);

        let mut pi = vec![0.0; n_states];
        for (s, p) in pi.iter_mut().enumerate() {
            let k = (s as u32).count_ones() as i32;
            *p = rho.powi(k) * (1.0 - rho).powi(sites as i32 - k);
        }

        let mut row_ptr = Vec::with_capacity(n_states + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut lambda_max: f64 = 0.0;
        row_ptr.push(0u32);
        let mut row = std::collections::BTreeMap::new();
        for s in 0..n_states as u32 {
            row.clear();
            let mut exit = 0.0;
            for x in 0..sites {
                if (s >> x) & 1 == 0 {
                    continue;
                }
                for (&z, &p) in law.offsets().iter().zip(law.weights()) {
                    let y = (x as i64 + z).rem_euclid(sites as i64) as usize;
                    if (s >> y) & 1 == 1 {
                        continue;
                    }
                    let target = s ^ (1 << x) ^ (1 << y);
                    *row.entry(target).or_insert(0.0) += p;
                    exit += p;
                }
            }
            *row.entry(s).or_insert(0.0) += -exit;
            lambda_max = lambda_max.max(exit);
            for (&c, &v) in &row {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len() as u32);
        }

        Ok(OracleModel {
            sites,
            n_states,
            law: law.clone(),
            rho,
            chi,
            mask,
            pi,
            row_ptr,
            col_idx,
            vals,
            lambda_max,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn stationary_measure(&self) -> &[f64] {
        &self.pi
    }

    pub fn uniformization_rate(&self) -> f64 {
        self.lambda_max
    }

    fn apply_q(&self, v: &[f64], side: Side) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        match side {
            Side::Right => {
                for s in 0..self.n_states {
                    let (a, b) = (self.row_ptr[s] as usize, self.row_ptr[s + 1] as usize);
                    let mut acc = 0.0;
                    for k in a..b {
                        acc += self.vals[k] * v[self.col_idx[k] as usize];
                    }
                    out[s] = acc;
                }
            }
            Side::Left => {
                for s in 0..self.n_states {
                    let vs = v[s];
                    if vs == 0.0 {
                        continue;
                    }
                    let (a, b) = (self.row_ptr[s] as usize, self.row_ptr[s + 1] as usize);
                    for k in a..b {
                        out[self.col_idx[k] as usize] += vs * self.vals[k];
                    }
                }
            }
        }
        out
    }

    /// e^{tQ} acting on a function (right) or measure (left) by
    /// uniformization. Poisson tail mass at stop <= 1e-13 and the last
    /// appended term weight <= 1e-12, so the truncation error is below both.
    fn expm_apply(&self, v: &[f64], t: f64, side: Side) -> Vec<f64> {
        assert!(t >= 0.0, "semigroup time must be nonnegative");
        if t == 0.0 || self.lambda_max == 0.0 {
            return v.to_vec();
        }
        let lt = self.lambda_max * t;
        let mut weight = (-lt).exp();
        let mut cum = weight;
        let mut power: Vec<f64> = v.to_vec();
        let mut acc: Vec<f64> = v.iter().map(|x| x * weight).collect();
        let mut k = 0u64;
        loop {
            if 1.0 - cum <= EXPM_TAIL && weight <= EXPM_TERM && k as f64 >= lt {
                return acc;
            }
            k += 1;
            // power <- P . power with P = I + Q/Lambda.
            let qv = self.apply_q(&power, side);
            for (p, q) in power.iter_mut().zip(&qv) {
                *p += q / self.lambda_max;
            }
            weight *= lt / k as f64;
            cum += weight;
            for (a, p) in acc.iter_mut().zip(&power) {
                *a += weight * p;
            }
        }
    }

    /// Occupancy covariance S(x,t) for all x at once: the signed measure
    /// pi.(eta_0 - rho) is evolved once on the left, then paired with each
    /// eta_x - rho.
    pub fn exact_two_point(&self, t: f64) -> Vec<f64> {
        let mut mu0 = self.pi.clone();
        for (s, m) in mu0.iter_mut().enumerate() {
            *m *= bit(s as u32, 0) - self.rho;
        }
        let mu_t = self.expm_apply(&mu0, t, Side::Left);
        (0..self.sites)
            .map(|x| {
                mu_t.iter()
                    .enumerate()
                    .map(|(s, m)| m * (bit(s as u32, x) - self.rho))
                    .sum()
            })
            .collect()
    }

    /// Distribution at time t started from the single configuration `s0`.
    pub fn distribution_from_state(&self, s0: u32, t: f64) -> Vec<f64> {
        let mut delta = vec![0.0; self.n_states];
        delta[(s0 & self.mask) as usize] = 1.0;
        self.expm_apply(&delta, t, Side::Left)
    }

    /// Centered-second-moment diffusivity from the exact two-point function.
    /// Refused when the light cone cannot be contained on the ring.
    pub fn exact_diffusivity(&self, t: f64) -> Result<f64, OracleError> {
        assert!(t > 0.0, "diffusivity needs t > 0");
        let spread = self.law.range() as f64 * t + 4.0 * (self.law.sigma2() * t).sqrt();
        if spread > self.sites as f64 / 2.0 {
            return Err(OracleError::WrapDominated {
                t,
                sites: self.sites,
            });
        }
        let s = self.exact_two_point(t);
        let center = (1.0 - 2.0 * self.rho) * self.law.drift() * t;
        let sum: f64 = s
            .iter()
            .enumerate()
            .map(|(x, v)| {
                let xc = centered_site(x, self.sites) as f64;
                (xc - center).powi(2) * v
            })
            .sum();
        Ok(sum / (self.chi * t))
    }

    /// The ring shift sum W = sum_x tau_x psi as a state vector.
    pub fn shift_sum(&self, psi: &[f64]) -> Vec<f64> {
        let l = self.sites;
        (0..self.n_states)
            .map(|s| {
                let s = s as u32;
                (0..l)
                    .map(|x| {
                        let rot = ((s >> x) | (s << (l - x))) & self.mask;
                        psi[rot as usize]
                    })
                    .sum()
            })
            .collect()
    }

    fn pi_mean(&self, phi: &[f64]) -> f64 {
        self.pi.iter().zip(phi).map(|(p, f)| p * f).sum()
    }

    fn check_mean_zero(&self, phi: &[f64]) -> Result<(), OracleError> {
        let mean = self.pi_mean(phi);
        let scale = phi.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        if mean.abs() > MEAN_ZERO_RTOL * scale {
            return Err(OracleError::NotMeanZero { mean });
        }
        Ok(())
    }

    /// <<phi, psi>> = sum over all L shifts of E_pi[phi . tau_x psi].
    pub fn exact_inner_product(&self, phi: &[f64], psi: &[f64]) -> Result<f64, OracleError> {
        self.check_mean_zero(phi)?;
        self.check_mean_zero(psi)?;
        let w = self.shift_sum(psi);
        Ok(self
            .pi
            .iter()
            .zip(phi)
            .zip(&w)
            .map(|((p, f), g)| p * f * g)
            .sum())
    }

    /// The normalized flux observable w_0 as a state vector.
    pub fn flux_vector(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| {
                let s = s as u32;
                let e0 = bit(s, 0) - self.rho;
                let mut acc = 0.0;
                for (&z, &p) in self.law.offsets().iter().zip(self.law.weights()) {
                    let y = z.rem_euclid(self.sites as i64) as usize;
                    acc += p * (bit(s, y) - self.rho);
                }
                acc * e0 / self.chi
            })
            .collect()
    }

    /// Solves (lambda - Q)u = w by the geometric series of
    /// (lambda+Lambda)^{-1}(I - gamma P)^{-1}, gamma = Lambda/(lambda+Lambda),
    /// and certifies the residual.
    pub fn resolve(&self, lambda: f64, w: &[f64]) -> Result<ResolventSolution, OracleError> {
        assert!(lambda > 0.0, "resolvent parameter must be positive");
        let denom = lambda + self.lambda_max;
        let w_scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        let mut term: Vec<f64> = w.iter().map(|x| x / denom).collect();
        let mut u = term.clone();
        let max_iter = 4_000_000usize;
        for it in 1..=max_iter {
            // term <- gamma P term, accumulated into u.
            let qv = self.apply_q(&term, Side::Right);
            for (t, q) in term.iter_mut().zip(&qv) {
                *t = (*t + q / self.lambda_max) * (self.lambda_max / denom);
            }
            for (a, t) in u.iter_mut().zip(&term) {
                *a += t;
            }
            let term_norm = term.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            // Solution tail <= term * gamma/(1-gamma) = term * Lambda/lambda;
            // residual after stopping <= term * Lambda. Bound both.
            let stop_scale = self.lambda_max.max(self.lambda_max / lambda);
            if term_norm * stop_scale <= 0.25 * RESOLVENT_RTOL * w_scale {
                let qu = self.apply_q(&u, Side::Right);
                let residual = u
                    .iter()
                    .zip(&qu)
                    .zip(w)
                    .map(|((ui, qi), wi)| (lambda * ui - qi - wi).abs())
                    .fold(0.0f64, f64::max);
                let residual_rel = residual / w_scale;
                if residual_rel <= RESOLVENT_RTOL {
                    return Ok(ResolventSolution {
                        u,
                        residual_rel,
                        iterations: it,
                    });
                }
                return Err(OracleError::SolveFailed {
                    residual: residual_rel,
                    iterations: it,
                });
            }
        }
        Err(OracleError::SolveFailed {
            residual: f64::INFINITY,
            iterations: max_iter,
        })
    }

    /// Resolvent quadratic form of the flux: <<w, (lambda - Q)^{-1} w>>.
    pub fn exact_h1_norm_squared(&self, lambda: f64) -> Result<f64, OracleError> {
        let w = self.flux_vector();
        let sol = self.resolve(lambda, &w)?;
        self.exact_inner_product(&w, &sol.u)
    }

    /// Time-averaged integrated-current covariance
    ///   t^{-1} . 2 int_0^t (t-u) <<w, e^{uQ} w>> du,
    /// by composite Simpson refinement on an exactly-evolved integrand.
    pub fn exact_integrated_current_norm(&self, t: f64) -> Result<f64, OracleError> {
        assert!(t > 0.0, "needs t > 0");
        let w = self.flux_vector();
        let big_w = self.shift_sum(&w);
        let pi_w: Vec<f64> = self.pi.iter().zip(&w).map(|(p, f)| p * f).collect();

        let integrate = |panels: usize| -> f64 {
            let h = t / panels as f64;
            let mut evolved = big_w.clone();
            let mut values = Vec::with_capacity(panels + 1);
            for j in 0..=panels {
                if j > 0 {
                    evolved = self.expm_apply(&evolved, h, Side::Right);
                }
                let u = j as f64 * h;
                let g: f64 = pi_w.iter().zip(&evolved).map(|(a, b)| a * b).sum();
                values.push((t - u) * g);
            }
            let mut acc = values[0] + values[panels];
            for (j, v) in values.iter().enumerate().take(panels).skip(1) {
                acc += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            acc * h / 3.0
        };

        let mut prev = integrate(64);
        let mut panels = 128;
        while panels <= 8192 {
            let cur = integrate(panels);
            if (cur - prev).abs() <= QUAD_RTOL * cur.abs().max(1e-300) {
                return Ok(2.0 * cur / t);
            }
            prev = cur;
            panels *= 2;
        }
        Err(OracleError::QuadratureFailure { rtol: QUAD_RTOL })
    }

    /// Compares the integrated-current form against 12x the resolvent form at
    /// lambda = 1/t for each requested time.
    pub fn check_lemma21(&self, t_grid: &[f64]) -> Result<Vec<Lemma21Row>, OracleError> {
        let mut rows = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            let lhs = self.exact_integrated_current_norm(t)?;
            let rhs = 12.0 * self.exact_h1_norm_squared(1.0 / t)?;
            rows.push(Lemma21Row {
                t,
                lhs,
                rhs,
                ratio: lhs / rhs,
                violation: lhs > rhs * (1.0 + 1e-8),
            });
        }
        Ok(rows)
    }
}
