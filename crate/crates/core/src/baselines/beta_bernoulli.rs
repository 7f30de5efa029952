//! Finite-population beta-Bernoulli predictor.
//!
//! Each of `K` sites has frequency `Beta(a, b)`. Conditioned on being seen,
//! a site appears `j` times out of `N` with probability proportional to
//! `C(N, j) (a)_{j↑} (b)_{(N-j)↑} / (a+b)_{N↑}`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::sfs::SiteFrequencySpectrum;
use crate::special::{ln_choose, ln_gamma_ratio, log_rising_unchecked, log_sum_exp};

/// Smallest shape parameter the fit will return.
pub const SHAPE_FLOOR: f64 = 1e-8;
const SHAPE_CEIL: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBernoulliFit {
    pub a: f64,
    pub b: f64,
    pub loglik: f64,
    pub warnings: Vec<String>,
}

fn ln_occupancy(n: usize, j: usize, a: f64, b: f64) -> f64 {
    ln_choose(n as u64, j as u64) + log_rising_unchecked(a, j as f64) + log_rising_unchecked(b, (n - j) as f64)
        - log_rising_unchecked(a + b, n as f64)
}

/// `Σ_j f_j ln λ_j` with `λ_j = p_j / Σ_{ℓ>=1} p_ℓ`.
pub fn bb_loglik(sfs: &SiteFrequencySpectrum, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("beta shapes must be positive (got a = {a}, b = {b})")));
    }
    if sfs.is_empty() {
        return Ok(0.0);
    }
    let n = sfs.n();
    let ln_p: Vec<f64> = (1..=n).map(|j| ln_occupancy(n, j, a, b)).collect();
    let ln_norm = log_sum_exp(&ln_p);
    Ok(sfs.iter().map(|(j, f)| f as f64 * (ln_p[j - 1] - ln_norm)).sum())
}

/// Maximum-likelihood `(a, b)` by Nelder–Mead over `(ln a, ln b)`, restarted
/// from a 3×3 grid; the best restart wins.
pub fn bb_fit(sfs: &SiteFrequencySpectrum) -> Result<BetaBernoulliFit> {
    if sfs.is_empty() {
        return Err(Error::invalid("cannot fit beta-Bernoulli model to an empty spectrum"));
    }
    let clamp = |v: f64| v.exp().clamp(SHAPE_FLOOR, SHAPE_CEIL);
    let neg = |x: &[f64]| -> f64 {
        bb_loglik(sfs, clamp(x[0]), clamp(x[1])).map_or(f64::INFINITY, |v| -v)
    };
    let mut best: Option<(f64, f64, f64)> = None;
    for a0 in [0.01f64, 0.1, 1.0] {
        for b0 in [0.5f64, 2.0, 10.0] {
            let r = nelder_mead(neg, &[a0.ln(), b0.ln()], 0.5, 1e-12, 2000);
            let (a, b) = (clamp(r.x[0]), clamp(r.x[1]));
            let ll = bb_loglik(sfs, a, b)?;
            if best.is_none_or(|(_, _, l)| ll > l) {
                best = Some((a, b, ll));
            }
        }
    }
    let (a, b, loglik) = best.expect("nine restarts");
    let mut warnings = Vec::new();
    if a <= SHAPE_FLOOR * 1.0001 {
        warnings.push(format!("shape a reached its floor {SHAPE_FLOOR:e}; spectrum is dominated by singletons"));
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(BetaBernoulliFit { a, b, loglik, warnings })
}

/// `Δ_N(M) = (f_1/a) ((N+b-1)/N) [1 - B(a, N+M+b)/B(a, N+b)]`.
pub fn bb_predict(sfs: &SiteFrequencySpectrum, fit: &BetaBernoulliFit, m: u64) -> f64 {
    let f1 = sfs.get(1) as f64;
    if f1 == 0.0 || m == 0 {
        return 0.0;
    }
    let n = sfs.n() as f64;
    let (a, b) = (fit.a, fit.b);
    // ln B(a, N+M+b) - ln B(a, N+b)
    let d = ln_gamma_ratio(n + b, a) - ln_gamma_ratio(n + m as f64 + b, a);
    (f1 / a) * ((n + b - 1.0) / n) * -d.exp_m1()
}

/// Large-`M` limit of [`bb_predict`].
pub fn bb_predict_limit(sfs: &SiteFrequencySpectrum, fit: &BetaBernoulliFit) -> f64 {
    let n = sfs.n() as f64;
    (sfs.get(1) as f64 / fit.a) * ((n + fit.b - 1.0) / n)
}
