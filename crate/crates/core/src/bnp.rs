//! Posterior predictives of the three-parameter beta process.
//!
//! Given a pilot of `N` samples, the number of variants that are new in a
//! follow-up of `M` samples is Poisson. Under perfect observation its rate is
//!
//! ```text
//! U(N, M) = α Σ_{m=1}^{M} (c+σ)_{(N+m-1)↑} / (c+1)_{(N+m-1)↑}
//! ```
//!
//! and when a present variant is called with probability `φ_init` in the
//! pilot and `φ_follow` in the follow-up, the rate becomes
//!
//! ```text
//! γ = α φ_follow Σ_{m=1}^{M} E[(1 - φ_follow B)^{m-1} (1 - φ_init B)^N],  B ~ Beta(1-σ, c+σ).
//! ```
//!
//! The same holds per follow-up occurrence count `r` (rates `λ_r`, `γ_r`).
//! All Γ-ratios are assembled in log space and exponentiated per term.

use crate::error::{Error, Result};
use crate::params::BPHyperParams;
use crate::quadrature::{self, BetaRule, Shape};
use crate::special::{self, ln_choose, ln_gamma_ratio, log_rising_unchecked};

/// Above this follow-up size the noiseless sum is evaluated in closed form.
pub const DIRECT_SUM_LIMIT: u64 = 1_000_000;

/// Poisson posterior predictive for a count of new variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonPrediction {
    mean: f64,
}

impl PoissonPrediction {
    pub fn new(mean: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(Error::domain(format!("Poisson rate must be finite and >= 0 (got {mean})")));
        }
        Ok(Self { mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.mean
    }

    /// Smallest `k` with `P(U <= k) >= q`.
    pub fn quantile(&self, q: f64) -> Result<u64> {
        special::poisson_quantile(q, self.mean)
    }
}

/// `ln[(c+σ)_{k↑} / (c+1)_{k↑}]`.
#[inline]
fn ln_term(p: &BPHyperParams, k: f64) -> f64 {
    let (s, c) = (p.sigma(), p.c());
    ln_gamma_ratio(c + 1.0 + k, s - 1.0) - ln_gamma_ratio(c + 1.0, s - 1.0)
}

/// Expected number of new variants `U(N, M)` under perfect observation.
///
/// Summed term by term up to [`DIRECT_SUM_LIMIT`]; beyond that the
/// telescoping identity `Σ_k Γ(k+a)/Γ(k+a+1-σ) = [Γ(k+a+1)/Γ(k+a+1-σ)]/σ`
/// (differences at the endpoints) gives the sum exactly.
pub fn expected_new_variants(n: u64, m: u64, p: &BPHyperParams) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if m > DIRECT_SUM_LIMIT && p.sigma() > 1e-3 {
        return expected_new_variants_closed(n, m, p);
    }
    expected_new_variants_direct(n, m, p)
}

/// Direct O(M) summation of `U(N, M)`.
pub fn expected_new_variants_direct(n: u64, m: u64, p: &BPHyperParams) -> f64 {
    let sum: f64 = (0..m).map(|i| ln_term(p, (n + i) as f64).exp()).sum();
    p.alpha() * sum
}

/// Closed form of `U(N, M)` by telescoping. Loses relative accuracy as σ → 0.
pub fn expected_new_variants_closed(n: u64, m: u64, p: &BPHyperParams) -> f64 {
    let (s, c) = (p.sigma(), p.c());
    if s == 0.0 {
        // Σ c/(k+c) = c (ψ(N+M+c) − ψ(N+c))
        return p.alpha()
            * c
            * (statrs::function::gamma::digamma((n + m) as f64 + c)
                - statrs::function::gamma::digamma(n as f64 + c));
    }
    let head = ln_gamma_ratio(c + s, 1.0 - s);
    let hi = ln_gamma_ratio((n + m) as f64 + c, s);
    let lo = ln_gamma_ratio(n as f64 + c, s);
    p.alpha() * (head + lo).exp() * (hi - lo).exp_m1() / s
}

/// Cumulative `U(N, m)` for `m = 1..=m_max`.
pub fn new_variants_curve(n: u64, m_max: u64, p: &BPHyperParams) -> Vec<f64> {
    let mut acc = 0.0;
    (0..m_max)
        .map(|i| {
            acc += ln_term(p, (n + i) as f64).exp();
            p.alpha() * acc
        })
        .collect()
}

/// Poisson law of the new-variant count under perfect observation.
pub fn new_variants_posterior(n: u64, m: u64, p: &BPHyperParams) -> PoissonPrediction {
    PoissonPrediction {
        mean: expected_new_variants(n, m, p),
    }
}

fn check_r(r: u64, m: u64) -> Result<()> {
    if r == 0 || r > m {
        return Err(Error::invalid(format!("occurrence count r = {r} outside 1..={m}")));
    }
    Ok(())
}

/// `λ_r`: expected new variants seen exactly `r` times in the follow-up.
pub fn expected_new_rare(n: u64, m: u64, r: u64, p: &BPHyperParams) -> Result<f64> {
    check_r(r, m)?;
    Ok(rare_rate(n, m, r, p))
}

fn rare_rate(n: u64, m: u64, r: u64, p: &BPHyperParams) -> f64 {
    let (s, c) = (p.sigma(), p.c());
    let total = (n + m) as f64;
    // ln[(c+σ)_{(N+M-r)↑} / (c+1)_{(N+M-1)↑}]
    let ratio = ln_gamma_ratio(c + total, s - r as f64) + ln_gamma_ratio(c + s, 1.0 - s);
    let ln = ln_choose(m, r) + log_rising_unchecked(1.0 - s, (r - 1) as f64) + ratio;
    p.alpha() * ln.exp()
}

/// `Σ_{r=1}^{R} λ_r`: expected new variants seen at most `R` times.
pub fn expected_new_rare_cum(n: u64, m: u64, cap: u64, p: &BPHyperParams) -> Result<f64> {
    check_r(cap, m)?;
    Ok((1..=cap).map(|r| rare_rate(n, m, r, p)).sum())
}

fn require_discount(p: &BPHyperParams) -> Result<()> {
    if p.sigma() == 0.0 {
        return Err(Error::domain(
            "asymptotic constants need sigma > 0 (no power-law growth at sigma = 0)",
        ));
    }
    Ok(())
}

/// `ξ = (α/σ) Γ(c+1)/Γ(c+σ)`: the limit of `U(N, M) / M^σ`.
pub fn asymptotic_xi(p: &BPHyperParams) -> Result<f64> {
    require_discount(p)?;
    let (s, c) = (p.sigma(), p.c());
    Ok(p.alpha() / s * ln_gamma_ratio(c + s, 1.0 - s).exp())
}

/// `ξ_r = (α/r!) (1-σ)_{(r-1)↑} Γ(c+1)/Γ(c+σ)`: the limit of `λ_r / M^σ`.
pub fn asymptotic_xi_r(p: &BPHyperParams, r: u64) -> Result<f64> {
    require_discount(p)?;
    if r == 0 {
        return Err(Error::invalid("occurrence count r must be >= 1"));
    }
    let (s, c) = (p.sigma(), p.c());
    let ln_fact = statrs::function::factorial::ln_factorial(r);
    let ln = log_rising_unchecked(1.0 - s, (r - 1) as f64) - ln_fact + ln_gamma_ratio(c + s, 1.0 - s);
    Ok(p.alpha() * ln.exp())
}

fn check_phi(phi: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::domain(format!("{name} must lie in [0, 1] (got {phi})")));
    }
    Ok(())
}

/// `(1 - φ_f x)^{k}` and `(1 - φ_i x)^{N}` in log form.
#[inline]
fn ln_survive(phi: f64, x: f64, k: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * (-phi * x).ln_1p()
    }
}

/// `Σ_{m=1}^{M} φ_f (1 - φ_f x)^{m-1} = (1 - (1 - φ_f x)^M) / x`, finite at `x = 0`.
#[inline]
fn geometric_calls(phi_follow: f64, x: f64, m: f64) -> f64 {
    let t = phi_follow * x;
    if t == 0.0 {
        m * phi_follow
    } else {
        -(m * (-t).ln_1p()).exp_m1() / x
    }
}

/// `γ`: expected new variants when pilot and follow-up calls succeed with
/// probabilities `phi_init` and `phi_follow`.
///
/// The per-`m` Beta expectations are aggregated node by node on one shared
/// quadrature rule, so the cost is independent of `M`.
pub fn expected_new_variants_noisy(
    n: u64,
    m: u64,
    p: &BPHyperParams,
    phi_init: f64,
    phi_follow: f64,
) -> Result<f64> {
    check_phi(phi_init, "phi_init")?;
    check_phi(phi_follow, "phi_follow")?;
    if m == 0 || phi_follow == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = (1.0 - p.sigma(), p.c() + p.sigma());
    let (nf, mf) = (n as f64, m as f64);
    let shape = Shape {
        degree: Some(m - 1 + if phi_init > 0.0 { n } else { 0 }),
        decay: phi_follow * mf + phi_init * nf,
    };
    let est = quadrature::converge(a, b, shape, |rule| {
        vec![rule.integrate(|x| geometric_calls(phi_follow, x, mf) * ln_survive(phi_init, x, nf).exp())]
    })?;
    Ok(p.alpha() * est[0])
}

/// Reference evaluation of `γ` as the literal sum of `M` Beta expectations.
pub fn expected_new_variants_noisy_direct(
    n: u64,
    m: u64,
    p: &BPHyperParams,
    phi_init: f64,
    phi_follow: f64,
) -> Result<f64> {
    check_phi(phi_init, "phi_init")?;
    check_phi(phi_follow, "phi_follow")?;
    let (a, b) = (1.0 - p.sigma(), p.c() + p.sigma());
    let mut sum = 0.0;
    for k in 1..=m {
        sum += quadrature::beta_expectation(a, b, phi_follow, k - 1, phi_init, n)?;
    }
    Ok(p.alpha() * phi_follow * sum)
}

/// Cumulative `γ(m)` for `m = 1..=m_max` under noisy observation.
pub fn noisy_new_variants_curve(
    n: u64,
    m_max: u64,
    p: &BPHyperParams,
    phi_init: f64,
    phi_follow: f64,
) -> Result<Vec<f64>> {
    check_phi(phi_init, "phi_init")?;
    check_phi(phi_follow, "phi_follow")?;
    if m_max == 0 {
        return Ok(Vec::new());
    }
    if phi_follow == 0.0 {
        return Ok(vec![0.0; m_max as usize]);
    }
    let (a, b) = (1.0 - p.sigma(), p.c() + p.sigma());
    let nf = n as f64;
    let shape = Shape {
        degree: Some(m_max - 1 + if phi_init > 0.0 { n } else { 0 }),
        decay: phi_follow * m_max as f64 + phi_init * nf,
    };
    let len = m_max as usize;
    let est = quadrature::converge(a, b, shape, |rule| curve_on_rule(rule, len, nf, phi_init, phi_follow))?;
    Ok(est.into_iter().map(|v| p.alpha() * v).collect())
}

fn curve_on_rule(rule: &BetaRule, len: usize, n: f64, phi_init: f64, phi_follow: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let base = w * phi_follow * ln_survive(phi_init, x, n).exp();
        if base == 0.0 {
            continue;
        }
        let step = 1.0 - phi_follow * x;
        let mut pow = 1.0;
        let mut acc = 0.0;
        for slot in out.iter_mut() {
            acc += pow;
            *slot += base * acc;
            pow *= step;
        }
    }
    out
}

/// `γ_r`: expected new variants seen exactly `r` times in a noisy follow-up.
pub fn expected_new_rare_noisy(
    n: u64,
    m: u64,
    r: u64,
    p: &BPHyperParams,
    phi_init: f64,
    phi_follow: f64,
) -> Result<f64> {
    check_r(r, m)?;
    check_phi(phi_init, "phi_init")?;
    check_phi(phi_follow, "phi_follow")?;
    if phi_follow == 0.0 {
        return Ok(0.0);
    }
    let (s, c) = (p.sigma(), p.c());
    let rf = r as f64;
    let prefactor = ln_choose(m, r) + rf * phi_follow.ln() + log_rising_unchecked(1.0 - s, rf - 1.0)
        - log_rising_unchecked(1.0 + c, rf - 1.0);
    let e = quadrature::beta_expectation(rf - s, c + s, phi_follow, m - r, phi_init, n)?;
    Ok(p.alpha() * prefactor.exp() * e)
}

/// `Σ_{r=1}^{R} γ_r`.
pub fn expected_new_rare_noisy_cum(
    n: u64,
    m: u64,
    cap: u64,
    p: &BPHyperParams,
    phi_init: f64,
    phi_follow: f64,
) -> Result<f64> {
    check_r(cap, m)?;
    (1..=cap).try_fold(0.0, |acc, r| {
        Ok(acc + expected_new_rare_noisy(n, m, r, p, phi_init, phi_follow)?)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::gamma::gamma;

    fn params(a: f64, s: f64, c: f64) -> BPHyperParams {
        BPHyperParams::new(a, s, c).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn first_sample_has_alpha_new_variants() {
        for p in [params(20.0, 0.1, 1.0), params(3.0, 0.0, 0.2), params(60.0, 0.5, -0.4)] {
            assert!(rel(expected_new_variants(0, 1, &p), p.alpha()) < 1e-14);
            assert_eq!(expected_new_variants(17, 0, &p), 0.0);
        }
    }

    #[test]
    fn direct_sum_matches_rising_factorial_definition() {
        // Oracle: the ratio of rising factorials from running products.
        let p = params(20.0, 0.1, 1.0);
        let (n, m) = (5u64, 40u64);
        let mut total = 0.0;
        for k in n..n + m {
            let num: f64 = (0..k).map(|i| p.c() + p.sigma() + i as f64).product();
            let den: f64 = (0..k).map(|i| p.c() + 1.0 + i as f64).product();
            total += num / den;
        }
        assert!(rel(expected_new_variants(n, m, &p), p.alpha() * total) < 1e-12);
    }

    #[test]
    fn closed_form_agrees_with_direct_summation() {
        for p in [params(20.0, 0.1, 1.0), params(60.0, 0.5, 1.0), params(5.0, 0.9, -0.5), params(2.0, 0.0, 3.0)] {
            let d = expected_new_variants_direct(37, 100_000, &p);
            let c = expected_new_variants_closed(37, 100_000, &p);
            assert!(rel(c, d) < 1e-6, "{p:?}: {c} vs {d}");
        }
    }

    #[test]
    fn curve_matches_pointwise() {
        let p = params(40.0, 0.25, 1.0);
        let curve = new_variants_curve(12, 50, &p);
        for (i, v) in curve.iter().enumerate() {
            assert!(rel(*v, expected_new_variants(12, i as u64 + 1, &p)) < 1e-12);
        }
    }

    #[test]
    fn increments_telescope() {
        let p = params(20.0, 0.3, 0.7);
        for m in 1..30 {
            let inc = expected_new_variants(9, m, &p) - expected_new_variants(9, m - 1, &p);
            let one = expected_new_variants(9 + m - 1, 1, &p);
            assert!(rel(inc, one) < 1e-10);
        }
    }

    #[test]
    fn rare_rates_partition_the_total() {
        for p in [params(20.0, 0.1, 1.0), params(60.0, 0.5, 1.0), params(1.0, 0.25, 2.0)] {
            for &(n, m) in &[(0u64, 1u64), (10, 10), (100, 1900)] {
                let total = expected_new_variants(n, m, &p);
                let parts = expected_new_rare_cum(n, m, m, &p).unwrap();
                assert!(rel(parts, total) < 1e-8, "{p:?} n={n} m={m}: {parts} vs {total}");
            }
            let one = expected_new_rare(50, 1, 1, &p).unwrap();
            assert!(rel(one, expected_new_variants(50, 1, &p)) < 1e-12);
        }
    }

    #[test]
    fn rare_rate_bounds() {
        let p = params(20.0, 0.1, 1.0);
        assert!(expected_new_rare(10, 5, 0, &p).is_err());
        assert!(expected_new_rare(10, 5, 6, &p).is_err());
        assert!(expected_new_rare_cum(10, 5, 6, &p).is_err());
        let l1 = expected_new_rare(10, 5, 1, &p).unwrap();
        assert!(rel(expected_new_rare_cum(10, 5, 1, &p).unwrap(), l1) < 1e-15);
        let mut prev = 0.0;
        for cap in 1..=5 {
            let v = expected_new_rare_cum(10, 5, cap, &p).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn xi_values() {
        let p = params(20.0, 0.1, 1.0);
        let xi = asymptotic_xi(&p).unwrap();
        assert!(rel(xi, 200.0 / gamma(1.1)) < 1e-13);
        for s in [0.1, 0.4, 0.8] {
            let p = params(7.0, s, 2.5);
            let x1 = asymptotic_xi_r(&p, 1).unwrap();
            assert!(rel(x1, 7.0 * gamma(3.5) / gamma(2.5 + s)) < 1e-13);
            // Σ_{r<=R} (1-σ)_{(r-1)↑}/r! = (1 - (1-σ)_{R↑}/R!)/σ
            let cap = 200u64;
            let sum: f64 = (1..=cap).map(|r| asymptotic_xi_r(&p, r).unwrap()).sum();
            let tail = (log_rising_unchecked(1.0 - s, cap as f64)
                - statrs::function::factorial::ln_factorial(cap))
            .exp();
            assert!(rel(sum, asymptotic_xi(&p).unwrap() * (1.0 - tail)) < 1e-11);
        }
        assert!(asymptotic_xi(&params(1.0, 0.0, 1.0)).is_err());
        assert!(asymptotic_xi_r(&params(1.0, 0.0, 1.0), 2).is_err());
    }

    #[test]
    fn poisson_prediction_wraps_mean() {
        let p = params(20.0, 0.1, 1.0);
        let post = new_variants_posterior(100, 1900, &p);
        assert_eq!(post.mean(), expected_new_variants(100, 1900, &p));
        let zero = PoissonPrediction::new(0.0).unwrap();
        for q in [0.01, 0.5, 0.99] {
            assert_eq!(zero.quantile(q).unwrap(), 0);
        }
        assert!(post.quantile(0.1).unwrap() <= post.quantile(0.9).unwrap());
    }

    #[test]
    fn poisson_band_matches_clt_width() {
        for rate in [2.0e4, 1.0e5, 1.0e6] {
            let post = PoissonPrediction::new(rate).unwrap();
            let width = (post.quantile(0.975).unwrap() - post.quantile(0.025).unwrap()) as f64;
            let ratio = width / (2.0 * 1.96 * rate.sqrt());
            assert!((ratio - 1.0).abs() < 0.05, "rate {rate}: {ratio}");
        }
    }

    #[test]
    fn noisy_reduces_to_perfect_observation() {
        for p in [params(20.0, 0.1, 1.0), params(60.0, 0.5, 1.0), params(1.0, 0.25, 0.5)] {
            for &(n, m) in &[(0u64, 1u64), (10, 10), (100, 500)] {
                let noisy = expected_new_variants_noisy(n, m, &p, 1.0, 1.0).unwrap();
                let exact = expected_new_variants(n, m, &p);
                assert!(rel(noisy, exact) < 1e-8, "{p:?} {n} {m}: {noisy} vs {exact}");
            }
        }
    }

    #[test]
    fn aggregated_noisy_matches_term_by_term_sum() {
        let p = params(20.0, 0.1, 1.0);
        for &(n, m, fi, ff) in &[(10u64, 25u64, 0.9, 0.4), (100, 60, 0.97, 0.6), (0, 5, 0.0, 1.0)] {
            let fast = expected_new_variants_noisy(n, m, &p, fi, ff).unwrap();
            let slow = expected_new_variants_noisy_direct(n, m, &p, fi, ff).unwrap();
            assert!(rel(fast, slow) < 1e-9, "{fast} vs {slow}");
            let curve = noisy_new_variants_curve(n, m, &p, fi, ff).unwrap();
            assert!(rel(curve[m as usize - 1], fast) < 1e-9);
            let first = expected_new_variants_noisy(n, 1, &p, fi, ff).unwrap();
            assert!(rel(curve[0], first) < 1e-9);
        }
    }

    #[test]
    fn no_follow_up_calls_means_no_new_variants() {
        let p = params(20.0, 0.1, 1.0);
        assert_eq!(expected_new_variants_noisy(100, 50, &p, 0.9, 0.0).unwrap(), 0.0);
        assert_eq!(expected_new_rare_noisy(100, 50, 3, &p, 0.9, 0.0).unwrap(), 0.0);
        assert!(expected_new_variants_noisy(100, 50, &p, 1.2, 0.5).is_err());
    }

    #[test]
    fn noisy_rare_reduces_to_perfect_observation() {
        for p in [params(20.0, 0.1, 1.0), params(60.0, 0.5, 1.0), params(1.0, 0.25, 2.0)] {
            for &(n, m) in &[(10u64, 10u64), (100, 500)] {
                for r in [1, 2, 3, 5, 10] {
                    let noisy = expected_new_rare_noisy(n, m, r, &p, 1.0, 1.0).unwrap();
                    let exact = expected_new_rare(n, m, r, &p).unwrap();
                    assert!(rel(noisy, exact) < 1e-8, "{p:?} {n} {m} {r}: {noisy} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn noisy_rare_partitions_noisy_total() {
        let p = params(20.0, 0.25, 1.0);
        let (n, m, fi, ff) = (40u64, 30u64, 0.95, 0.55);
        let total = expected_new_variants_noisy(n, m, &p, fi, ff).unwrap();
        let parts = expected_new_rare_noisy_cum(n, m, m, &p, fi, ff).unwrap();
        assert!(rel(parts, total) < 1e-6, "{parts} vs {total}");
        let single = expected_new_rare_noisy(n, 1, 1, &p, fi, ff).unwrap();
        let want = p.alpha()
            * ff
            * quadrature::beta_expectation(1.0 - p.sigma(), p.c() + p.sigma(), ff, 0, fi, n).unwrap();
        assert!(rel(single, want) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn monotone_in_m_n_alpha(alpha in 0.1f64..100.0, s in 0.0f64..0.95, cp in 0.01f64..10.0,
                                 n in 0u64..200, m in 1u64..200) {
            let p = params(alpha, s, cp - s);
            let u = expected_new_variants(n, m, &p);
            prop_assert!(u.is_finite() && u > 0.0);
            prop_assert!(expected_new_variants(n, m + 1, &p) > u);
            prop_assert!(expected_new_variants(n + 1, m, &p) <= u * (1.0 + 1e-12));
            let doubled = expected_new_variants(n, m, &p.with_alpha(2.0 * alpha).unwrap());
            prop_assert!(rel(doubled, 2.0 * u) < 1e-12);
        }

        #[test]
        fn noisy_monotone_in_follow_up_phi(s in 0.0f64..0.9, cp in 0.05f64..5.0,
                                           n in 0u64..100, m in 1u64..100,
                                           fi in 0.0f64..=1.0, lo in 0.0f64..1.0, gap in 0.001f64..0.5) {
            let p = params(10.0, s, cp - s);
            let hi = (lo + gap).min(1.0);
            let a = expected_new_variants_noisy(n, m, &p, fi, lo).unwrap();
            let b = expected_new_variants_noisy(n, m, &p, fi, hi).unwrap();
            prop_assert!(a.is_finite() && b.is_finite());
            prop_assert!(b >= a * (1.0 - 1e-10));
        }
    }
}
