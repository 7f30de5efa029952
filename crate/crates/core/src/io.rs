//! Plain-text file formats.
//!
//! Matrix: first line `N K`, then one `n j` incidence per line (0-based).
//! Spectrum: CSV with header `r,count`. Frequencies: one value per line.
//! Hyperparameters: JSON object with `alpha`, `sigma`, `c`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::VariantMatrix;
use crate::params::BPHyperParams;
use crate::sfs::SiteFrequencySpectrum;
use crate::simulate::FrequencyVector;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses the matrix format from any reader; `path` labels errors.
pub fn parse_matrix(reader: impl Read, path: &Path) -> Result<VariantMatrix> {
    let mut lines = BufReader::new(reader).lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
        other => Some((i + 1, other)),
    });
    let (hl, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing `N K` header"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let (n, k) = match dims.as_slice() {
        [n, k] => (
            n.parse::<usize>().map_err(|e| parse_err(path, hl, format!("sample count: {e}")))?,
            k.parse::<usize>().map_err(|e| parse_err(path, hl, format!("column count: {e}")))?,
        ),
        _ => return Err(parse_err(path, hl, "header must be `N K`")),
    };
    if n == 0 {
        return Err(parse_err(path, hl, "matrix must have at least one sample"));
    }
    let mut rows = vec![Vec::new(); n];
    for (ln, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(path, ln, "expected `n j`"));
        };
        let i: usize = a.parse().map_err(|e| parse_err(path, ln, format!("sample index: {e}")))?;
        let j: usize = b.parse().map_err(|e| parse_err(path, ln, format!("variant index: {e}")))?;
        if i >= n {
            return Err(parse_err(path, ln, format!("sample index {i} >= N = {n}")));
        }
        if j >= k {
            return Err(parse_err(path, ln, format!("variant index {j} >= K = {k}")));
        }
        rows[i].push(j);
    }
    VariantMatrix::new(k, rows).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn read_matrix(path: &Path) -> Result<VariantMatrix> {
    parse_matrix(open(path)?, path)
}

pub fn write_matrix_to(matrix: &VariantMatrix, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{} {}", matrix.n_samples(), matrix.n_columns())?;
    for (i, row) in matrix.rows().iter().enumerate() {
        for j in row {
            writeln!(w, "{i} {j}")?;
        }
    }
    w.flush()
}

pub fn write_matrix(matrix: &VariantMatrix, path: &Path) -> Result<()> {
    write_matrix_to(matrix, create(path)?).map_err(|e| Error::io(path, e))
}

/// Writes the spectrum as CSV. The sample count is not stored.
pub fn write_sfs(sfs: &SiteFrequencySpectrum, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let run = |w: &mut csv::Writer<File>| -> csv::Result<()> {
        w.write_record(["r", "count"])?;
        for (r, c) in sfs.iter() {
            w.write_record([r.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    run(&mut w).map_err(|e| Error::io(path, e.into()))
}

/// Reads a spectrum CSV for a pilot of `n` samples.
pub fn read_sfs(path: &Path, n: usize) -> Result<SiteFrequencySpectrum> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["r", "count"] {
        return Err(parse_err(path, 1, "header must be `r,count`"));
    }
    let mut counts = std::collections::BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        let r: usize = rec[0].trim().parse().map_err(|e| parse_err(path, line, format!("r: {e}")))?;
        let c: u64 = rec[1].trim().parse().map_err(|e| parse_err(path, line, format!("count: {e}")))?;
        if counts.insert(r, c).is_some() {
            return Err(parse_err(path, line, format!("duplicate r = {r}")));
        }
    }
    SiteFrequencySpectrum::new(n, counts)
}

/// Reads one frequency per non-empty line.
pub fn read_frequencies(path: &Path) -> Result<FrequencyVector> {
    let mut thetas = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|e| parse_err(path, i + 1, format!("frequency: {e}")))?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(parse_err(path, i + 1, format!("frequency {v} outside (0, 1]")));
        }
        thetas.push(v);
    }
    FrequencyVector::new(thetas)
}

pub fn read_params(path: &Path) -> Result<BPHyperParams> {
    serde_json::from_reader(open(path)?).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

/// Writes any serializable value as pretty JSON.
pub fn write_json<T: serde::Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
