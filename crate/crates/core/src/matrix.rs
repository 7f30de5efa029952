//! Sparse binary variant matrices.
//!
//! Each row is one sequenced individual; the row stores the sorted set of
//! variant column indices observed in that individual. Row order is
//! significant: fold splitting and prefix truncation depend on it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary presence/absence of variants per sample, stored as sorted index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantMatrix {
    n_columns: usize,
    rows: Vec<Vec<usize>>,
}

impl VariantMatrix {
    /// Builds a matrix from per-sample index lists. Indices are sorted; duplicates
    /// within a sample are rejected, as are indices `>= n_columns`.
    pub fn new(n_columns: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("variant matrix must have at least one sample"));
        }
        let mut rows = rows;
        for (n, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!(
                    "sample {n} lists variant {} more than once",
                    w[0]
                )));
            }
            if let Some(&last) = row.last() {
                if last >= n_columns {
                    return Err(Error::invalid(format!(
                        "sample {n} has variant index {last} >= column count {n_columns}"
                    )));
                }
            }
        }
        Ok(Self { n_columns, rows })
    }

    /// Builds a matrix whose column count is one past the largest index used.
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self> {
        let width = rows
            .iter()
            .flat_map(|r| r.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        Self::new(width, rows)
    }

    /// `n` samples with no variants.
    pub fn empty(n_samples: usize, n_columns: usize) -> Result<Self> {
        Self::new(n_columns, vec![Vec::new(); n_samples])
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    /// Declared column width. Columns may be all-zero.
    pub fn n_columns(&self) -> usize {
        self.n_columns
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row(&self, n: usize) -> &[usize] {
        &self.rows[n]
    }

    /// Total number of (sample, variant) incidences.
    pub fn n_incidences(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Per-column totals across all samples.
    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0usize; self.n_columns];
        for row in &self.rows {
            for &j in row {
                sums[j] += 1;
            }
        }
        sums
    }

    /// Number of columns with at least one incidence.
    pub fn n_distinct(&self) -> usize {
        self.column_sums().iter().filter(|&&s| s > 0).count()
    }

    /// The first `n` samples.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.rows.len() {
            return Err(Error::invalid(format!(
                "prefix length {n} outside 1..={}",
                self.rows.len()
            )));
        }
        Ok(Self {
            n_columns: self.n_columns,
            rows: self.rows[..n].to_vec(),
        })
    }

    /// Samples at the given positions, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::invalid("row selection is empty"));
        }
        let mut rows = Vec::with_capacity(idx.len());
        for &i in idx {
            let row = self.rows.get(i).ok_or_else(|| {
                Error::invalid(format!("row {i} out of range for {} samples", self.rows.len()))
            })?;
            rows.push(row.clone());
        }
        Ok(Self {
            n_columns: self.n_columns,
            rows,
        })
    }

    /// Drops all-zero columns and renumbers the rest densely, preserving order.
    pub fn compact(&self) -> Self {
        let used: BTreeSet<usize> = self.rows.iter().flatten().copied().collect();
        let mut remap = vec![usize::MAX; self.n_columns];
        for (new, &old) in used.iter().enumerate() {
            remap[old] = new;
        }
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&j| remap[j]).collect())
            .collect();
        Self {
            n_columns: used.len(),
            rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(VariantMatrix::new(3, vec![vec![0, 0]]).is_err());
        assert!(VariantMatrix::new(3, vec![vec![3]]).is_err());
        assert!(VariantMatrix::new(3, vec![]).is_err());
    }

    #[test]
    fn rows_are_sorted_and_order_kept() {
        let m = VariantMatrix::new(5, vec![vec![4, 1], vec![], vec![2]]).unwrap();
        assert_eq!(m.row(0), &[1, 4]);
        assert_eq!(m.row(2), &[2]);
        assert_eq!(m.n_incidences(), 3);
        assert_eq!(m.n_distinct(), 3);
    }

    #[test]
    fn compact_renumbers_densely() {
        let m = VariantMatrix::new(10, vec![vec![9, 3], vec![3]]).unwrap();
        let c = m.compact();
        assert_eq!(c.n_columns(), 2);
        assert_eq!(c.row(0), &[0, 1]);
        assert_eq!(c.row(1), &[0]);
    }
}
