//! Log-space gamma-function helpers shared by the predictors.

use statrs::function::gamma::{digamma, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// `ln (a)_{b↑} = ln Γ(a + b) − ln Γ(a)`, the log rising factorial.
///
/// Small `b` is summed directly; larger `b` goes through log-gamma.
pub fn log_rising(a: f64, b: u64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain(format!("rising factorial needs a > 0 (got {a})")));
    }
    Ok(log_rising_unchecked(a, b as f64))
}

/// Log rising factorial for a real, non-negative increment. Caller guarantees `a > 0`.
#[inline]
pub(crate) fn log_rising_unchecked(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else if b <= 30.0 && b.fract() == 0.0 {
        (0..b as u32).map(|i| (a + i as f64).ln()).sum()
    } else {
        ln_gamma_ratio(a, b)
    }
}

// B_{2k} / (2k (2k - 1)) for k = 1..=8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

const STIRLING_MIN: f64 = 10.0;

fn stirling_tail(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut acc = 0.0;
    for c in STIRLING {
        acc += c * pow;
        pow *= inv2;
    }
    acc
}

/// `ln Γ(x + d) − ln Γ(x)` for `x > 0`, `x + d > 0`.
///
/// Evaluated as a difference of Stirling series after shifting both
/// arguments above 10, so the result keeps full relative accuracy even when
/// `x` is in the millions and `d` is O(1).
pub fn ln_gamma_ratio(x: f64, d: f64) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let lo = x.min(x + d);
    let mut shift_terms = 0.0;
    let mut x = x;
    if lo < STIRLING_MIN {
        let k = (STIRLING_MIN - lo).ceil() as u32;
        for i in 0..k {
            let i = i as f64;
            shift_terms += (x + i).ln() - (x + d + i).ln();
        }
        x += k as f64;
    }
    let y = x + d;
    let main = (x - 0.5) * (d / x).ln_1p() + d * y.ln() - d;
    main + stirling_tail(y) - stirling_tail(x) + shift_terms
}

/// `ln C(n, k)` for integers.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if k <= 30 {
        return (0..k)
            .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
            .sum();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `H(n) = 1 + 1/2 + … + 1/n`, with `H(0) = 0`.
pub fn harmonic(n: u64) -> f64 {
    // Summed from the small end for accuracy.
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

/// `H(hi − 1) − H(lo − 1) = Σ_{ℓ=lo}^{hi−1} 1/ℓ`, for `1 <= lo <= hi`.
pub fn harmonic_gap(hi: u64, lo: u64) -> f64 {
    debug_assert!(lo >= 1 && lo <= hi);
    (lo..hi).rev().map(|k| 1.0 / k as f64).sum()
}

/// The same gap via `ψ(hi) − ψ(lo)`.
pub fn harmonic_gap_digamma(hi: u64, lo: u64) -> f64 {
    digamma(hi as f64) - digamma(lo as f64)
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `P(X <= k)` for `X ~ Poisson(rate)`.
pub fn poisson_cdf(k: u64, rate: f64) -> f64 {
    if rate <= 0.0 {
        return 1.0;
    }
    gamma_ur(k as f64 + 1.0, rate)
}

/// Smallest `k` with `P(X <= k) >= q` for `X ~ Poisson(rate)`.
pub fn poisson_quantile(q: f64, rate: f64) -> Result<u64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0, 1) (got {q})")));
    }
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::domain(format!("Poisson rate must be finite and >= 0 (got {rate})")));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let z = statrs::distribution::ContinuousCDF::inverse_cdf(
        &statrs::distribution::Normal::standard(),
        q,
    );
    let mut k = (rate + z * rate.sqrt()).floor().max(0.0) as u64;
    if poisson_cdf(k, rate) >= q {
        while k > 0 && poisson_cdf(k - 1, rate) >= q {
            k -= 1;
        }
    } else {
        while poisson_cdf(k, rate) < q {
            k += 1;
        }
    }
    Ok(k)
}
