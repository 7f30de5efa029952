//! Empirical-Bayes hyperparameter fitting.
//!
//! The pilot is split into its first `n` samples and the rest. For each
//! prefix `m` of the held-out part, the number of variants absent from the
//! first `n` samples is the target; the predictor is matched to these counts
//! by minimizing the summed squared error with differential evolution over
//! `(ln α, σ, ln(c + σ))`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::bnp;
use crate::error::{Error, Result};
use crate::matrix::VariantMatrix;
use crate::optim::{differential_evolution, DEOptions};
use crate::params::BPHyperParams;

pub const LN_ALPHA_BOUNDS: (f64, f64) = (-6.907755278982137, 16.11809565095832); // ln 1e-3, ln 1e7
pub const SIGMA_BOUNDS: (f64, f64) = (0.0, 0.999);
pub const LN_C_SHIFT_BOUNDS: (f64, f64) = (-13.815510557964274, 9.210340371976184); // ln 1e-6, ln 1e4

/// Search box for `(ln α, σ, ln(c + σ))`.
pub fn default_bounds() -> Vec<(f64, f64)> {
    vec![LN_ALPHA_BOUNDS, SIGMA_BOUNDS, LN_C_SHIFT_BOUNDS]
}

impl DEOptions {
    /// Default optimizer settings on the hyperparameter box.
    pub fn for_hyperparams(seed: u64) -> Self {
        Self {
            seed,
            bounds: default_bounds(),
            ..Self::default()
        }
    }
}

/// Maps a point of the search box to hyperparameters.
pub fn decode(x: &[f64]) -> Result<BPHyperParams> {
    let sigma = x[1];
    BPHyperParams::new(x[0].exp(), sigma, x[2].exp() - sigma)
}

/// Inverse of [`decode`].
pub fn encode(p: &BPHyperParams) -> [f64; 3] {
    [p.alpha().ln(), p.sigma(), (p.c() + p.sigma()).ln()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    L2,
    L1,
}

impl Loss {
    fn apply(self, r: f64) -> f64 {
        match self {
            Loss::L2 => r * r,
            Loss::L1 => r.abs(),
        }
    }
}

/// How the pilot is split for fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Training fraction; `None` means `n = ⌊2N/3⌋`.
    pub split_frac: Option<f64>,
    pub loss: Loss,
    /// Number of cyclic rotations of the sample order whose objectives are summed.
    pub folds: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            split_frac: None,
            loss: Loss::L2,
            folds: 1,
        }
    }
}

impl FitConfig {
    pub fn split_n(&self, n_samples: usize) -> Result<usize> {
        let n = match self.split_frac {
            None => 2 * n_samples / 3,
            Some(f) if f > 0.0 && f < 1.0 => (f * n_samples as f64).floor() as usize,
            Some(f) => return Err(Error::invalid(format!("split fraction must lie in (0, 1) (got {f})"))),
        };
        if n == 0 || n >= n_samples {
            return Err(Error::invalid(format!(
                "split leaves no training or no held-out samples (n = {n}, N = {n_samples})"
            )));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BPHyperParams,
    pub objective: f64,
    pub evaluations: usize,
    pub split_n: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Cumulative counts of variants absent from samples `0..n` that appear in
/// samples `n..n+m`, for `m = 1..=N-n`.
pub fn heldout_new_counts(matrix: &VariantMatrix, n: usize) -> Result<Vec<u64>> {
    let total = matrix.n_samples();
    if n == 0 || n >= total {
        return Err(Error::invalid(format!("split n = {n} outside 1..{total}")));
    }
    let mut seen = vec![false; matrix.n_columns()];
    for row in &matrix.rows()[..n] {
        for &j in row {
            seen[j] = true;
        }
    }
    let mut count = 0u64;
    Ok(matrix.rows()[n..]
        .iter()
        .map(|row| {
            for &j in row {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                }
            }
            count
        })
        .collect())
}

/// Predicted cumulative new-variant counts for `m = 1..=len` after `n` samples,
/// with calling probability `phi` in both parts.
pub fn predicted_curve(p: &BPHyperParams, n: usize, len: usize, phi: f64) -> Result<Vec<f64>> {
    if phi == 1.0 {
        Ok(bnp::new_variants_curve(n as u64, len as u64, p))
    } else {
        bnp::noisy_new_variants_curve(n as u64, len as u64, p, phi, phi)
    }
}

/// `Σ_m (pred(n, m) - truths[m])²` with calling probability `phi_init`
/// applied to both parts of the split.
pub fn fit_objective(p: &BPHyperParams, truths: &[u64], n: usize, phi_init: f64) -> Result<f64> {
    objective_with(p, truths, n, phi_init, Loss::L2)
}

fn objective_with(p: &BPHyperParams, truths: &[u64], n: usize, phi: f64, loss: Loss) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::invalid("no held-out counts to fit"));
    }
    let pred = predicted_curve(p, n, truths.len(), phi)?;
    Ok(pred
        .iter()
        .zip(truths)
        .map(|(y, &t)| loss.apply(y - t as f64))
        .sum())
}

/// Fits hyperparameters with the default split and squared loss.
pub fn fit_hyperparams(matrix: &VariantMatrix, phi_init: f64, opts: &DEOptions) -> Result<FitResult> {
    fit_hyperparams_with(matrix, phi_init, opts, &FitConfig::default())
}

/// Rotates the sample order left by `shift`.
fn rotated(matrix: &VariantMatrix, shift: usize) -> Result<VariantMatrix> {
    let n = matrix.n_samples();
    let idx: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
    matrix.select_rows(&idx)
}

pub fn fit_hyperparams_with(
    matrix: &VariantMatrix,
    phi_init: f64,
    opts: &DEOptions,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let total = matrix.n_samples();
    if total < 3 {
        return Err(Error::invalid(format!("fitting needs at least 3 samples (got {total})")));
    }
    if !(phi_init > 0.0 && phi_init <= 1.0) {
        return Err(Error::domain(format!("phi_init must lie in (0, 1] (got {phi_init})")));
    }
    if cfg.folds == 0 {
        return Err(Error::invalid("fold count must be >= 1"));
    }
    let n = cfg.split_n(total)?;
    let mut targets = Vec::with_capacity(cfg.folds);
    for k in 0..cfg.folds {
        let m = if k == 0 { matrix.clone() } else { rotated(matrix, k * total / cfg.folds)? };
        targets.push(heldout_new_counts(&m, n)?);
    }

    let loss = cfg.loss;
    let eval = |p: &BPHyperParams| -> Result<f64> {
        targets
            .iter()
            .try_fold(0.0, |acc, t| Ok(acc + objective_with(p, t, n, phi_init, loss)?))
    };
    let de = differential_evolution(
        |x| match decode(x).and_then(|p| eval(&p)) {
            Ok(v) => v,
            Err(_) => f64::INFINITY,
        },
        opts,
    )?;

    let params = decode(&de.x)?;
    let objective = eval(&params)?;
    let mut warnings = Vec::new();
    if matrix.n_incidences() == 0 {
        warnings.push("pilot contains no variants; alpha driven to its lower bound".to_string());
    }
    if !de.converged {
        warnings.push(format!(
            "optimizer stopped after {} generations without meeting the stagnation tolerance",
            de.generations
        ));
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(FitResult {
        params,
        objective,
        evaluations: de.evaluations,
        split_n: n,
        converged: de.converged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn codec_roundtrip() {
        let p = BPHyperParams::new(20.0, 0.1, 1.0).unwrap();
        let back = decode(&encode(&p)).unwrap();
        assert!((back.alpha() - 20.0).abs() < 1e-12);
        assert!((back.c() - 1.0).abs() < 1e-12);
        assert_eq!(back.sigma(), 0.1);
    }

    #[test]
    fn heldout_counts_examples() {
        let m = VariantMatrix::new(6, vec![vec![0, 1], vec![1, 2], vec![3], vec![2, 4, 5]]).unwrap();
        assert_eq!(heldout_new_counts(&m, 3).unwrap(), vec![2]);
        assert_eq!(heldout_new_counts(&m, 1).unwrap(), vec![1, 2, 4]);
        assert!(heldout_new_counts(&m, 0).is_err());
        assert!(heldout_new_counts(&m, 4).is_err());
        let disjoint = VariantMatrix::new(6, vec![vec![0], vec![1, 2], vec![3, 4, 5]]).unwrap();
        assert_eq!(heldout_new_counts(&disjoint, 1).unwrap(), vec![2, 5]);
    }

    #[test]
    fn heldout_counts_match_set_difference() {
        let p = BPHyperParams::new(10.0, 0.4, 1.0).unwrap();
        let m = crate::simulate::draw_ibp(60, &p, 3).unwrap();
        let n = 20;
        let counts = heldout_new_counts(&m, n).unwrap();
        let pilot: HashSet<usize> = m.rows()[..n].iter().flatten().copied().collect();
        for (k, &c) in counts.iter().enumerate() {
            let follow: HashSet<usize> = m.rows()[n..=n + k].iter().flatten().copied().collect();
            assert_eq!(c as usize, follow.difference(&pilot).count());
        }
    }

    #[test]
    fn split_sizes() {
        let cfg = FitConfig::default();
        assert_eq!(cfg.split_n(100).unwrap(), 66);
        assert_eq!(cfg.split_n(3).unwrap(), 2);
        let frac = FitConfig {
            split_frac: Some(0.6667),
            ..FitConfig::default()
        };
        assert_eq!(frac.split_n(100).unwrap(), 66);
        assert!(FitConfig { split_frac: Some(1.0), ..cfg }.split_n(10).is_err());
    }

    #[test]
    fn objective_is_squared_error_of_curve() {
        let p = BPHyperParams::new(5.0, 0.3, 0.5).unwrap();
        let truths = [3u64, 4, 9];
        let obj = fit_objective(&p, &truths, 10, 1.0).unwrap();
        let want: f64 = (1..=3)
            .map(|m| (bnp::expected_new_variants(10, m, &p) - truths[m as usize - 1] as f64).powi(2))
            .sum();
        assert!((obj - want).abs() < 1e-10 * want);
        let noisy = fit_objective(&p, &truths, 10, 0.7).unwrap();
        let want: f64 = (1..=3)
            .map(|m| {
                let y = bnp::expected_new_variants_noisy(10, m, &p, 0.7, 0.7).unwrap();
                (y - truths[m as usize - 1] as f64).powi(2)
            })
            .sum();
        assert!((noisy - want).abs() < 1e-9 * want);
        let tiny = BPHyperParams::new(1e-12, 0.3, 0.5).unwrap();
        assert!(fit_objective(&tiny, &[0, 0, 0], 10, 1.0).unwrap() < 1e-20);
        assert!(fit_objective(&p, &[], 10, 1.0).is_err());
    }
}
