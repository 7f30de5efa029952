//! Smoothed Good–Toulmin extrapolation.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::sfs::SiteFrequencySpectrum;

/// Smoothing pair: `κ = ⌊½ log_2(·)⌋, θ = 1/(t+1)` or `κ = ⌊½ log_3(·)⌋, θ = 2/(t+2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingBase {
    #[default]
    Log2,
    Log3,
}

impl std::str::FromStr for SmoothingBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log2" => Ok(Self::Log2),
            "log3" => Ok(Self::Log3),
            _ => Err(Error::invalid(format!("unknown smoothing base '{s}' (expected log2 or log3)"))),
        }
    }
}

/// Binomial smoothing parameters `(κ, θ)` for extrapolation ratio `t = M/N > 1`.
pub fn smoothing(m: u64, n: usize, base: SmoothingBase) -> (u64, f64) {
    let t = m as f64 / n as f64;
    let arg = (m as f64 * m as f64 / n as f64) / (t - 1.0);
    let (ln_base, theta) = match base {
        SmoothingBase::Log2 => (2f64.ln(), 1.0 / (t + 1.0)),
        SmoothingBase::Log3 => (3f64.ln(), 2.0 / (t + 2.0)),
    };
    let kappa = (0.5 * arg.ln() / ln_base).floor().max(0.0) as u64;
    (kappa, theta)
}

/// `P(Binom(κ, θ) >= r)`.
pub fn binomial_tail(kappa: u64, theta: f64, r: u64) -> f64 {
    if r == 0 {
        1.0
    } else if r > kappa {
        0.0
    } else {
        beta_reg(r as f64, (kappa - r + 1) as f64, theta)
    }
}

/// Predicted number of new variants in `M` further samples.
///
/// For `t = M/N <= 1` this is the alternating series `Σ (-1)^{r+1} t^r f_r`;
/// beyond that each term is damped by `P(Binom(κ, θ) >= r)`. Terms with
/// `r > r_max` are dropped (`r_max` defaults to `N`).
pub fn good_toulmin(sfs: &SiteFrequencySpectrum, m: u64, base: SmoothingBase, r_max: Option<usize>) -> f64 {
    let n = sfs.n();
    let r_max = r_max.unwrap_or(n);
    if m == 0 {
        return 0.0;
    }
    let t = m as f64 / n as f64;
    let smooth = (t > 1.0).then(|| smoothing(m, n, base));
    sfs.iter()
        .take_while(|&(r, _)| r <= r_max)
        .map(|(r, f)| {
            let weight = match smooth {
                Some((kappa, theta)) => binomial_tail(kappa, theta, r as u64),
                None => 1.0,
            };
            if weight == 0.0 {
                return 0.0;
            }
            let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
            sign * (r as f64 * t.ln()).exp() * f as f64 * weight
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_choose;
    use std::collections::BTreeMap;

    fn sfs(n: usize, pairs: &[(usize, u64)]) -> SiteFrequencySpectrum {
        SiteFrequencySpectrum::new(n, pairs.iter().copied().collect::<BTreeMap<_, _>>()).unwrap()
    }

    #[test]
    fn unit_ratio_is_alternating_sum() {
        let s = sfs(10, &[(1, 3), (2, 1)]);
        assert_eq!(good_toulmin(&s, 10, SmoothingBase::Log2, None), 2.0);
        assert_eq!(good_toulmin(&s, 0, SmoothingBase::Log2, None), 0.0);
        let half = good_toulmin(&s, 5, SmoothingBase::Log3, None);
        assert!((half - (3.0 * 0.5 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn tail_matches_direct_binomial_sum() {
        for &(k, th) in &[(5u64, 0.3), (12, 0.5), (1, 0.9), (30, 0.05)] {
            for r in 0..=k + 1 {
                let direct: f64 = (r..=k)
                    .map(|i| (ln_choose(k, i) + i as f64 * f64::ln(th) + (k - i) as f64 * (1.0 - th).ln()).exp())
                    .sum();
                assert!((binomial_tail(k, th, r) - direct).abs() < 1e-12, "k={k} th={th} r={r}");
            }
        }
    }

    #[test]
    fn smoothed_terms_are_bounded() {
        let s = sfs(50, &[(1, 20), (2, 9), (3, 6), (4, 2), (10, 1)]);
        for base in [SmoothingBase::Log2, SmoothingBase::Log3] {
            let (kappa, theta) = smoothing(100, 50, base);
            assert!(theta > 0.0 && theta < 1.0);
            let bound: f64 = s
                .iter()
                .map(|(r, f)| 2f64.powi(r as i32) * f as f64 * binomial_tail(kappa, theta, r as u64))
                .sum();
            let v = good_toulmin(&s, 100, base, None);
            assert!(v.abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn smoothing_constants() {
        // t = 2, N = 50: (M²/N)/(t-1) = 200; ½ log2 200 = 3.82
        assert_eq!(smoothing(100, 50, SmoothingBase::Log2), (3, 1.0 / 3.0));
        // ½ log3 200 = 2.41
        assert_eq!(smoothing(100, 50, SmoothingBase::Log3), (2, 0.5));
    }
}
