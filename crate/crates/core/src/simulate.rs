//! Synthetic variant matrices.
//!
//! Every generator is driven by ChaCha8 seeded from a `u64`. Stream 0 of the
//! seed is reserved for per-sample quantities; column `j` draws from stream
//! `j + 1`. Columns are generated in parallel and the output does not depend
//! on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnp;
use crate::error::{Error, Result};
use crate::matrix::VariantMatrix;
use crate::params::BPHyperParams;

/// Lower truncation of the power-law frequency support.
pub const POWER_LAW_FLOOR: f64 = 1e-8;

/// Per-site population frequencies, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    thetas: Vec<f64>,
}

impl FrequencyVector {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if let Some((i, t)) = thetas.iter().enumerate().find(|(_, t)| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::invalid(format!("frequency {i} is {t}, outside (0, 1]")));
        }
        Ok(Self { thetas })
    }

    /// Empirical frequencies `column_sum / N` of the observed columns.
    pub fn from_matrix(matrix: &VariantMatrix) -> Self {
        let n = matrix.n_samples() as f64;
        let thetas = matrix
            .column_sums()
            .into_iter()
            .filter(|&s| s > 0)
            .map(|s| s as f64 / n)
            .collect();
        Self { thetas }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

/// Generator for stream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Indices in `start..end` that succeed in independent Bernoulli(`p`) trials.
fn bernoulli_hits(rng: &mut ChaCha8Rng, p: f64, start: usize, end: usize) -> Vec<usize> {
    if p <= 0.0 || start >= end {
        return Vec::new();
    }
    if p >= 1.0 {
        return (start..end).collect();
    }
    // Inverse-CDF geometric skips; stays finite for p far below machine epsilon.
    let ln_q = (-p).ln_1p();
    let mut hits = Vec::new();
    let mut pos = start as f64;
    loop {
        let u: f64 = rng.random();
        pos += ((1.0 - u).ln() / ln_q).floor();
        if pos >= end as f64 {
            return hits;
        }
        hits.push(pos as usize);
        pos += 1.0;
    }
}

/// Transposes per-column row lists into a matrix.
fn assemble(n_samples: usize, columns: Vec<Vec<usize>>) -> Result<VariantMatrix> {
    let mut rows = vec![Vec::new(); n_samples];
    for (j, col) in columns.iter().enumerate() {
        for &i in col {
            rows[i].push(j);
        }
    }
    VariantMatrix::new(columns.len(), rows)
}

fn require_samples(n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::invalid("number of samples must be >= 1"));
    }
    Ok(())
}

/// Draws `n_samples` rows from the three-parameter Indian buffet process.
///
/// Sample `n` introduces `Pois(α (c+σ)_{(n-1)↑}/(c+1)_{(n-1)↑})` new
/// variants. A variant first seen in sample `n0` is then generated column-wise
/// from its de Finetti representation: its frequency is
/// `Beta(1-σ, c+σ+n0-1)` and later samples carry it independently with that
/// probability. This matches the sequential inclusion rule
/// `(m_j - σ)/(c + n - 1)` in distribution (see [`draw_ibp_sequential`]).
pub fn draw_ibp(n_samples: usize, p: &BPHyperParams, seed: u64) -> Result<VariantMatrix> {
    require_samples(n_samples)?;
    let births = ibp_births(n_samples, p, seed);
    let (s, c) = (p.sigma(), p.c());
    let columns: Vec<Vec<usize>> = births
        .par_iter()
        .enumerate()
        .map(|(j, &born)| {
            let mut rng = substream(seed, j as u64 + 1);
            let theta = Beta::new(1.0 - s, c + s + born as f64)
                .expect("valid beta parameters")
                .sample(&mut rng);
            let mut rows = vec![born];
            rows.extend(bernoulli_hits(&mut rng, theta, born + 1, n_samples));
            rows
        })
        .collect();
    assemble(n_samples, columns)
}

/// Zero-based birth sample of every variant, in order of appearance.
fn ibp_births(n_samples: usize, p: &BPHyperParams, seed: u64) -> Vec<usize> {
    let mut rng = substream(seed, 0);
    let mut births = Vec::new();
    for n in 0..n_samples {
        let rate = bnp::expected_new_variants(n as u64, 1, p);
        let k = Poisson::new(rate).expect("positive rate").sample(&mut rng) as usize;
        births.extend(std::iter::repeat_n(n, k));
    }
    births
}

/// The literal sequential three-parameter IBP: sample `n` carries each
/// earlier variant `j` with probability `(m_j - σ)/(c + n - 1)`, then adds
/// its Poisson number of new variants. Quadratic in the matrix size.
pub fn draw_ibp_sequential(n_samples: usize, p: &BPHyperParams, seed: u64) -> Result<VariantMatrix> {
    require_samples(n_samples)?;
    let (s, c) = (p.sigma(), p.c());
    let mut rng = substream(seed, 0);
    let mut counts: Vec<u64> = Vec::new();
    let mut rows = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        let mut row = Vec::new();
        let denom = c + n as f64;
        for (j, m) in counts.iter_mut().enumerate() {
            if rng.random::<f64>() < (*m as f64 - s) / denom {
                *m += 1;
                row.push(j);
            }
        }
        let rate = bnp::expected_new_variants(n as u64, 1, p);
        let k = Poisson::new(rate).expect("positive rate").sample(&mut rng) as usize;
        for _ in 0..k {
            row.push(counts.len());
            counts.push(1);
        }
        rows.push(row);
    }
    VariantMatrix::new(counts.len(), rows)
}

/// Independent Bernoulli columns with frequencies `thetas[j] * phi`.
fn bernoulli_columns(
    n_samples: usize,
    n_columns: usize,
    seed: u64,
    theta: impl Fn(&mut ChaCha8Rng, usize) -> f64 + Sync,
) -> Result<VariantMatrix> {
    require_samples(n_samples)?;
    let columns: Vec<Vec<usize>> = (0..n_columns)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, j as u64 + 1);
            let t = theta(&mut rng, j);
            bernoulli_hits(&mut rng, t, 0, n_samples)
        })
        .collect();
    assemble(n_samples, columns)
}

/// `K` sites with `Beta(a, b)` frequencies. All-zero columns are kept.
pub fn draw_beta_bernoulli(n_samples: usize, k: usize, a: f64, b: f64, seed: u64) -> Result<VariantMatrix> {
    if k == 0 {
        return Err(Error::invalid("number of sites K must be >= 1"));
    }
    let beta = Beta::new(a, b).map_err(|e| Error::invalid(format!("beta shape ({a}, {b}): {e}")))?;
    bernoulli_columns(n_samples, k, seed, |rng, _| beta.sample(rng))
}

/// Inverse CDF of the density `∝ θ^{-ξ}` on `[POWER_LAW_FLOOR, 1]`.
pub fn power_law_quantile(u: f64, exponent: f64) -> f64 {
    let e = POWER_LAW_FLOOR;
    let g = 1.0 - exponent;
    if g.abs() < 1e-12 {
        return e.powf(1.0 - u);
    }
    let lo = e.powf(g);
    (lo + u * (1.0 - lo)).powf(1.0 / g).clamp(e, 1.0)
}

/// `K` sites with frequencies from the truncated power law `θ^{-ξ}`, `ξ ∈ [0, 2)`.
pub fn draw_power_law(n_samples: usize, k: usize, exponent: f64, seed: u64) -> Result<VariantMatrix> {
    if k == 0 {
        return Err(Error::invalid("number of sites K must be >= 1"));
    }
    if !(0.0..2.0).contains(&exponent) {
        return Err(Error::invalid(format!("power-law exponent must lie in [0, 2) (got {exponent})")));
    }
    bernoulli_columns(n_samples, k, seed, |rng, _| power_law_quantile(rng.random(), exponent))
}

/// Samples carrying site `j` independently with probability `θ_j φ`.
pub fn draw_from_frequencies(freqs: &FrequencyVector, n_samples: usize, phi: f64, seed: u64) -> Result<VariantMatrix> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::domain(format!("phi must lie in [0, 1] (got {phi})")));
    }
    let thetas = freqs.thetas();
    bernoulli_columns(n_samples, thetas.len(), seed, |_, j| thetas[j] * phi)
}

/// Keeps each incidence independently with probability `phi`.
pub fn thin_matrix(matrix: &VariantMatrix, phi: f64, seed: u64) -> Result<VariantMatrix> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::domain(format!("phi must lie in [0, 1] (got {phi})")));
    }
    if phi == 1.0 {
        return Ok(matrix.clone());
    }
    let rows: Vec<Vec<usize>> = matrix
        .rows()
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut rng = substream(seed, i as u64);
            row.iter().copied().filter(|_| rng.random::<f64>() < phi).collect()
        })
        .collect();
    VariantMatrix::new(matrix.n_columns(), rows)
}
