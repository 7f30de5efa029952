//! Variant-calling probability under Poisson read depth.
//!
//! A locus covered by `Pois(λ)` reads, each erroneous with probability
//! `p_err`, is called when at least `T` reads are correct. Binomial thinning
//! of a Poisson count is Poisson, so `φ = P(Pois(λ(1 - p_err)) >= T)`.

use log::warn;
use statrs::function::gamma::gamma_lr;

use crate::params::SequencingConfig;

/// `φ = P(Pois(λ(1 - p_err)) >= T)` via the regularized lower incomplete gamma.
pub fn calling_probability(cfg: &SequencingConfig) -> f64 {
    let mu = cfg.effective_depth();
    if mu <= 0.0 {
        return 0.0;
    }
    gamma_lr(cfg.threshold() as f64, mu).clamp(0.0, 1.0)
}

/// Default truncation point for [`calling_probability_naive`].
pub fn default_t_max(cfg: &SequencingConfig) -> u64 {
    let mu = cfg.effective_depth();
    (mu + 12.0 * mu.sqrt() + 40.0).ceil() as u64
}

/// `Σ_{t<=t_max} Pois(t; λ) P(Binom(t, 1 - p_err) >= T)` summed term by term.
///
/// Warns when the Poisson mass beyond `t_max` exceeds `1e-14`.
pub fn calling_probability_naive(cfg: &SequencingConfig, t_max: u64) -> f64 {
    let lambda = cfg.depth();
    let q = 1.0 - cfg.p_err();
    let threshold = cfg.threshold() as u64;

    let mut total = 0.0;
    let mut mass = 0.0;
    let mut ln_pois = -lambda;
    for t in 0..=t_max {
        if t > 0 {
            ln_pois += lambda.ln() - (t as f64).ln();
        }
        let pois = ln_pois.exp();
        mass += pois;
        if t >= threshold {
            total += pois * binomial_upper_tail(t, threshold, q);
        }
    }
    let tail = 1.0 - mass;
    if tail > 1e-14 {
        warn!("naive calling probability truncated at t_max = {t_max}; Poisson tail mass {tail:.3e}");
    }
    total
}

/// `P(Binom(t, q) >= k)` by direct summation of log-space terms.
fn binomial_upper_tail(t: u64, k: u64, q: f64) -> f64 {
    if q >= 1.0 {
        return if t >= k { 1.0 } else { 0.0 };
    }
    if q <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let (lq, lr) = (q.ln(), (1.0 - q).ln());
    (k..=t)
        .map(|s| (crate::special::ln_choose(t, s) + s as f64 * lq + (t - s) as f64 * lr).exp())
        .sum()
}
