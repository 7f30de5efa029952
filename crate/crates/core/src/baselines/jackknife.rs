//! Jackknife predictors: the harmonic extrapolation jackknife and the
//! capture-recapture population-size jackknife, with sequential order
//! selection.

use log::{debug, warn};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::sfs::SiteFrequencySpectrum;
use crate::special::{harmonic_gap, ln_choose};

pub const MAX_ORDER: usize = 10;
pub const MAX_SELECTED_ORDER: usize = 5;

fn check_order(n: usize, p: usize) -> Result<()> {
    if p == 0 || p > MAX_ORDER.min(n.saturating_sub(1)) {
        return Err(Error::invalid(format!(
            "jackknife order {p} outside 1..={} for N = {n}",
            MAX_ORDER.min(n.saturating_sub(1))
        )));
    }
    Ok(())
}

/// Solves `A X = B` in place by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot vanishes.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let p = a.len();
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            for k in col..p {
                a[row][k] -= f * a[col][k];
            }
            for k in 0..b[row].len() {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    for col in (0..p).rev() {
        for k in 0..b[col].len() {
            let mut s = b[col][k];
            for j in col + 1..p {
                s -= a[col][j] * b[j][k];
            }
            b[col][k] = s / a[col][col];
        }
    }
    Some(b)
}

fn inf_norm(m: &[Vec<f64>]) -> f64 {
    m.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Weights `w` with `V̂_N^{(M)} = Σ_i w_i f_i` for the order-`p` harmonic
/// jackknife. Entries beyond `p` are 1 (the `V(N)` term).
pub fn jackknife_weights(n: usize, m: u64, p: usize) -> Result<Vec<f64>> {
    check_order(n, p)?;
    let mut w = vec![1.0; p];
    if m == 0 {
        return Ok(w);
    }
    let target = n as u64 + m;
    let delta = |from: usize| harmonic_gap(target, from as u64);
    let d0 = delta(n);
    // Row j: Σ_ℓ a_ℓ [Δ(N+M, N-j)^ℓ - Δ(N+M, N)^ℓ] = V(N) - V(N-j)
    let a: Vec<Vec<f64>> = (1..=p)
        .map(|j| {
            let dj = delta(n - j);
            (1..=p).map(|l| dj.powi(l as i32) - d0.powi(l as i32)).collect()
        })
        .collect();
    // V(N) - V(N-j) = Σ_{i<=j} C(j,i)/C(N,i) f_i, as a matrix acting on f_1..f_p.
    let b: Vec<Vec<f64>> = (1..=p)
        .map(|j| {
            (1..=p)
                .map(|i| {
                    if i > j {
                        0.0
                    } else {
                        (ln_choose(j as u64, i as u64) - ln_choose(n as u64, i as u64)).exp()
                    }
                })
                .collect()
        })
        .collect();
    let identity: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|k| f64::from(u8::from(i == k))).collect()).collect();
    let inverse = solve(a.clone(), identity)
        .ok_or_else(|| Error::Numerical {
            message: format!("singular jackknife system at order {p}"),
            previous: f64::NAN,
            last: f64::NAN,
        })?;
    let cond = inf_norm(&a) * inf_norm(&inverse);
    if cond > 1e10 {
        debug!("jackknife order {p}: system condition number {cond:.3e}");
    }
    let coef = solve(a, b).ok_or_else(|| Error::Numerical {
        message: format!("singular jackknife system at order {p}"),
        previous: f64::NAN,
        last: f64::NAN,
    })?;
    for (l, row) in coef.iter().enumerate() {
        let scale = d0.powi(l as i32 + 1);
        for (i, c) in row.iter().enumerate() {
            w[i] += scale * c;
        }
    }
    Ok(w)
}

fn apply(weights: &[f64], sfs: &SiteFrequencySpectrum) -> f64 {
    sfs.iter()
        .map(|(r, f)| weights.get(r - 1).copied().unwrap_or(1.0) * f as f64)
        .sum()
}

/// Predicted total distinct variants in `N + M` samples, order-`p` harmonic jackknife.
pub fn jackknife_predict(sfs: &SiteFrequencySpectrum, m: u64, p: usize) -> Result<f64> {
    Ok(apply(&jackknife_weights(sfs.n(), m, p)?, sfs))
}

/// Order-`p` capture-recapture estimate of the total number of variants.
pub fn population_jackknife(sfs: &SiteFrequencySpectrum, p: usize) -> Result<f64> {
    let n = sfs.n();
    check_order(n, p)?;
    let j = sfs.distinct() as f64;
    // ψ^(ℓ) = J - C(N,ℓ)^{-1} Σ_{i<=ℓ} C(N-i, ℓ-i) f_i
    let psi = |l: usize| -> f64 {
        let lost: f64 = (1..=l)
            .map(|i| {
                let ln = ln_choose((n - i) as u64, (l - i) as u64) - ln_choose(n as u64, l as u64);
                ln.exp() * sfs.get(i) as f64
            })
            .sum();
        j - lost
    };
    let ln_fact = statrs::function::factorial::ln_factorial(p as u64);
    let mut total = 0.0;
    for l in 0..=p {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let ln_w = ln_choose(p as u64, l as u64) + p as f64 * ((n - l) as f64).ln() - ln_fact;
        total += sign * ln_w.exp() * psi(l);
    }
    Ok(total)
}

/// Test statistic `T_p` for orders `p` and `p + 1`, or `None` when the
/// variance estimate is not positive.
pub fn order_statistic(sfs: &SiteFrequencySpectrum, m: u64, p: usize) -> Result<Option<f64>> {
    let n = sfs.n();
    let lo = jackknife_weights(n, m, p)?;
    let hi = jackknife_weights(n, m, p + 1)?;
    let d: Vec<f64> = (0..p + 1).map(|i| hi[i] - lo.get(i).copied().unwrap_or(1.0)).collect();
    let diff: f64 = (1..=p + 1).map(|r| d[r - 1] * sfs.get(r) as f64).sum();
    if diff == 0.0 {
        return Ok(Some(0.0));
    }
    let j = sfs.distinct() as f64;
    if j <= 1.0 {
        return Ok(None);
    }
    let sq: f64 = (1..=p + 1).map(|r| d[r - 1] * d[r - 1] * sfs.get(r) as f64).sum();
    let var = j / (j - 1.0) * (sq - diff * diff / j);
    if !(var > 0.0) {
        return Ok(None);
    }
    Ok(Some(diff / var.sqrt()))
}

/// First order whose two-sided normal test against the next order fails to
/// reject at `alpha_level`, capped at order 5.
pub fn jackknife_order_select(sfs: &SiteFrequencySpectrum, m: u64, alpha_level: f64) -> Result<usize> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::invalid(format!("test level must lie in (0, 1) (got {alpha_level})")));
    }
    let n = sfs.n();
    if n < 2 {
        return Err(Error::invalid("order selection needs at least 2 samples"));
    }
    let p_max = MAX_SELECTED_ORDER.min(n.saturating_sub(2)).max(1);
    let z = Normal::standard().inverse_cdf(1.0 - alpha_level / 2.0);
    for p in 1..p_max {
        match order_statistic(sfs, m, p)? {
            Some(t) if t.abs() < z => return Ok(p),
            Some(_) => {}
            None => warn!("jackknife order {p}: non-positive variance estimate, order skipped"),
        }
    }
    if p_max > 1 {
        warn!("jackknife order selection reached the cap p = {p_max}");
    }
    Ok(p_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::harmonic_gap_digamma;
    use std::collections::BTreeMap;

    fn sfs(n: usize, pairs: &[(usize, u64)]) -> SiteFrequencySpectrum {
        SiteFrequencySpectrum::new(n, pairs.iter().copied().collect::<BTreeMap<_, _>>()).unwrap()
    }

    #[test]
    fn population_order_one() {
        let s = sfs(10, &[(1, 2), (3, 2), (9, 1)]);
        assert!((population_jackknife(&s, 1).unwrap() - 6.8).abs() < 1e-12);
    }

    #[test]
    fn population_order_two_closed_form() {
        // J + (2N-3)/N f1 - (N-2)²/(N(N-1)) f2
        let s = sfs(12, &[(1, 5), (2, 3), (4, 2)]);
        let n: f64 = 12.0;
        let want = 10.0 + (2.0 * n - 3.0) / n * 5.0 - (n - 2.0).powi(2) / (n * (n - 1.0)) * 3.0;
        assert!((population_jackknife(&s, 2).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn zero_extrapolation_returns_observed() {
        let s = sfs(30, &[(1, 9), (2, 4), (7, 2)]);
        for p in 1..=5 {
            assert!((jackknife_predict(&s, 0, p).unwrap() - 15.0).abs() < 1e-12);
        }
    }

    #[test]
    fn order_one_harmonic_closed_form() {
        // a_1 = (N-1) f1 / N, prediction J + a_1 Δ(N+M, N)
        let s = sfs(25, &[(1, 11), (2, 5), (6, 1)]);
        let m = 75;
        let want = 17.0 + 24.0 / 25.0 * 11.0 * harmonic_gap(100, 25);
        assert!((jackknife_predict(&s, m, 1).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn harmonic_gap_two_ways() {
        for n in [10u64, 100, 1000] {
            assert!((harmonic_gap(2 * n, n) - harmonic_gap_digamma(2 * n, n)).abs() < 1e-12);
        }
    }

    #[test]
    fn consecutive_orders_differ_by_low_spectrum_terms() {
        // Changing f_r for r > p+1 moves both orders by the same amount.
        let a = sfs(40, &[(1, 20), (2, 8), (3, 5), (9, 4)]);
        let b = sfs(40, &[(1, 20), (2, 8), (3, 5), (9, 40)]);
        for p in 1..=2 {
            let da = jackknife_predict(&a, 60, p + 1).unwrap() - jackknife_predict(&a, 60, p).unwrap();
            let db = jackknife_predict(&b, 60, p + 1).unwrap() - jackknife_predict(&b, 60, p).unwrap();
            assert!((da - db).abs() < 1e-9);
        }
    }

    #[test]
    fn order_bounds() {
        let s = sfs(5, &[(1, 2)]);
        assert!(jackknife_predict(&s, 10, 0).is_err());
        assert!(jackknife_predict(&s, 10, 5).is_err());
        assert!(jackknife_predict(&s, 10, 4).is_ok());
    }

    #[test]
    fn selection_is_deterministic_and_bounded() {
        let s = sfs(100, &[(1, 80), (2, 30), (3, 15), (5, 10), (20, 6), (90, 2)]);
        let p = jackknife_order_select(&s, 1900, 0.05).unwrap();
        assert!((1..=5).contains(&p));
        assert_eq!(jackknife_order_select(&s, 1900, 0.05).unwrap(), p);
        // No singletons or doubletons: orders 1 and 2 coincide.
        let flat = sfs(100, &[(10, 30), (50, 4)]);
        assert_eq!(order_statistic(&flat, 500, 1).unwrap(), Some(0.0));
        assert_eq!(jackknife_order_select(&flat, 500, 0.05).unwrap(), 1);
    }
}
