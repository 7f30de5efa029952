//! Site-frequency spectrum (fingerprint) of a sample.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::VariantMatrix;

/// Counts `f[r]` of variants observed in exactly `r` of `n` samples.
///
/// Zero entries are not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteFrequencySpectrum {
    n: usize,
    counts: BTreeMap<usize, u64>,
}

impl SiteFrequencySpectrum {
    pub fn new(n: usize, counts: BTreeMap<usize, u64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("SFS sample size must be positive"));
        }
        if let Some((&r, _)) = counts.iter().find(|(&r, _)| r == 0 || r > n) {
            return Err(Error::invalid(format!("SFS key {r} outside 1..={n}")));
        }
        let counts = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        Ok(Self { n, counts })
    }

    /// Builds a spectrum from a dense vector where `dense[r - 1] = f[r]`.
    pub fn from_dense(n: usize, dense: &[u64]) -> Result<Self> {
        if dense.len() > n {
            return Err(Error::invalid(format!(
                "dense SFS has {} entries for n = {n}",
                dense.len()
            )));
        }
        let counts = dense
            .iter()
            .enumerate()
            .map(|(i, &c)| (i + 1, c))
            .collect();
        Self::new(n, counts)
    }

    /// Sample size N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `f[r]`, zero when absent.
    pub fn get(&self, r: usize) -> u64 {
        self.counts.get(&r).copied().unwrap_or(0)
    }

    /// Nonzero entries in increasing `r`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&r, &c)| (r, c))
    }

    /// Number of distinct observed variants J.
    pub fn distinct(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Σ r·f[r]: total incidences.
    pub fn incidences(&self) -> u64 {
        self.iter().map(|(r, c)| r as u64 * c).sum()
    }

    /// Largest r with a nonzero count.
    pub fn max_r(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Dense vector `v[r - 1] = f[r]` for r in 1..=n.
    pub fn to_dense(&self) -> Vec<u64> {
        let mut v = vec![0; self.n];
        for (r, c) in self.iter() {
            v[r - 1] = c;
        }
        v
    }
}

/// Tallies column totals into a frequency spectrum; zero columns are excluded.
pub fn build_sfs(matrix: &VariantMatrix) -> SiteFrequencySpectrum {
    let mut counts = BTreeMap::new();
    for s in matrix.column_sums() {
        if s > 0 {
            *counts.entry(s).or_insert(0u64) += 1;
        }
    }
    SiteFrequencySpectrum {
        n: matrix.n_samples(),
        counts,
    }
}
