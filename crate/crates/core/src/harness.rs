//! Fold-based evaluation of predictors against held-out data.
//!
//! The samples are split into equal folds (remainder dropped). Each fold in
//! turn is the pilot and every other retained sample, in fold order, is the
//! follow-up. Pilot incidences are kept with probability `φ_init` and
//! follow-up incidences with `φ_follow`, independently per fold. Every
//! method predicts the cumulative number of distinct variants (pilot plus
//! new) over the follow-up, and curves are summarized across folds.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, SmoothingBase};
use crate::bnp;
use crate::curve::{CurvePoint, PredictionCurve};
use crate::error::{Error, Result};
use crate::fit::{self, FitResult};
use crate::matrix::VariantMatrix;
use crate::noise::calling_probability;
use crate::optim::DEOptions;
use crate::params::{BPHyperParams, SequencingConfig};
use crate::sfs::build_sfs;
use crate::simulate::{substream, thin_matrix};

pub const DEFAULT_FOLDS: usize = 33;
pub const TRUTH_TAG: &str = "truth";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JackknifeOrder {
    Fixed(usize),
    Auto,
}

/// A prediction method selectable by tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bnp,
    BetaBernoulli,
    Jackknife(JackknifeOrder),
    GoodToulmin(SmoothingBase),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Bnp => write!(f, "bnp"),
            Method::BetaBernoulli => write!(f, "bb"),
            Method::Jackknife(JackknifeOrder::Auto) => write!(f, "jackknife:auto"),
            Method::Jackknife(JackknifeOrder::Fixed(p)) => write!(f, "jackknife:{p}"),
            Method::GoodToulmin(SmoothingBase::Log2) => write!(f, "gt:log2"),
            Method::GoodToulmin(SmoothingBase::Log3) => write!(f, "gt:log3"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("bnp", None) => Ok(Method::Bnp),
            ("bb", None) => Ok(Method::BetaBernoulli),
            ("jackknife", None | Some("auto")) => Ok(Method::Jackknife(JackknifeOrder::Auto)),
            ("jackknife", Some(p)) => {
                let p: usize = p
                    .parse()
                    .map_err(|_| Error::invalid(format!("jackknife order '{p}' is not an integer or 'auto'")))?;
                if !(1..=baselines::jackknife::MAX_ORDER).contains(&p) {
                    return Err(Error::invalid(format!("jackknife order {p} outside 1..=10")));
                }
                Ok(Method::Jackknife(JackknifeOrder::Fixed(p)))
            }
            ("gt" | "good_toulmin", None) => Ok(Method::GoodToulmin(SmoothingBase::Log2)),
            ("gt" | "good_toulmin", Some(b)) => Ok(Method::GoodToulmin(b.parse()?)),
            ("unseenest", _) => Err(Error::invalid(
                "method 'unseenest' (linear-programming histogram recovery) is not provided; \
                 use bnp, bb, jackknife[:p|:auto] or gt[:log2|:log3]",
            )),
            _ => Err(Error::invalid(format!(
                "unknown method '{s}' (expected bnp, bb, jackknife[:p|:auto], gt[:log2|:log3])"
            ))),
        }
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods: Vec<Method> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::invalid("no methods given"));
    }
    Ok(methods)
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub n_folds: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Consecutive blocks of samples instead of a seeded random assignment.
    pub contiguous: bool,
    pub output_path: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_folds: DEFAULT_FOLDS,
            methods: vec![
                Method::Bnp,
                Method::BetaBernoulli,
                Method::Jackknife(JackknifeOrder::Auto),
                Method::GoodToulmin(SmoothingBase::Log2),
            ],
            seed: 0,
            contiguous: false,
            output_path: None,
        }
    }
}

/// Everything computed for one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub pilot_distinct: usize,
    /// Total distinct variants after `m` follow-up samples, `m = 0..=M`.
    pub truth: Vec<f64>,
    /// Per method (in config order), predicted totals for `m = 0..=M`.
    pub predictions: Vec<Vec<f64>>,
    pub fitted: Option<BPHyperParams>,
    pub jackknife_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub methods: Vec<Method>,
    pub folds: Vec<FoldOutcome>,
    pub curves: Vec<PredictionCurve>,
    pub truth: PredictionCurve,
    pub fold_size: usize,
    pub phi_init: f64,
    pub phi_follow: f64,
}

impl EvalReport {
    pub fn curve(&self, method: Method) -> Option<&PredictionCurve> {
        let tag = method.to_string();
        self.curves.iter().find(|c| c.method() == tag)
    }

    /// Fold-averaged mean absolute relative error over `m = 1..=M`.
    pub fn mean_abs_rel_error(&self, method: Method) -> Option<f64> {
        let k = self.methods.iter().position(|&m| m == method)?;
        let per_fold: Vec<f64> = self
            .folds
            .iter()
            .map(|f| {
                let pairs = f.predictions[k].iter().zip(&f.truth).skip(1);
                let n = pairs.len().max(1) as f64;
                pairs.map(|(p, t)| (p - t).abs() / t.max(1.0)).sum::<f64>() / n
            })
            .collect();
        Some(per_fold.iter().sum::<f64>() / per_fold.len() as f64)
    }
}

/// Equal-size fold index lists over a seeded permutation (or contiguously).
pub fn assign_folds(n_samples: usize, n_folds: usize, seed: u64, contiguous: bool) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds (got {n_folds})")));
    }
    if n_folds > n_samples {
        return Err(Error::invalid(format!("{n_folds} folds exceed {n_samples} samples")));
    }
    let size = n_samples / n_folds;
    if size < 3 {
        return Err(Error::invalid(format!("fold size {size} is below the minimum of 3 samples")));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    if !contiguous {
        order.shuffle(&mut substream(seed, 0));
    }
    let dropped = n_samples - size * n_folds;
    if dropped > 0 {
        info!("dropping {dropped} samples so that {n_folds} folds have {size} samples each");
    }
    Ok(order[..size * n_folds].chunks(size).map(<[usize]>::to_vec).collect())
}

/// Independent 64-bit seeds for fold `k`.
fn fold_seeds(seed: u64, k: usize) -> [u64; 3] {
    let mut rng = substream(seed, k as u64 + 1);
    [rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

fn phi_of(cfg: Option<&SequencingConfig>) -> f64 {
    cfg.map_or(1.0, calling_probability)
}

/// Runs every method on every fold and summarizes the curves.
pub fn run_folds(
    matrix: &VariantMatrix,
    cfg: &EvalConfig,
    pilot_cfg: Option<&SequencingConfig>,
    follow_cfg: Option<&SequencingConfig>,
) -> Result<EvalReport> {
    if cfg.methods.is_empty() {
        return Err(Error::invalid("no methods to evaluate"));
    }
    let folds = assign_folds(matrix.n_samples(), cfg.n_folds, cfg.seed, cfg.contiguous)?;
    let phi_init = phi_of(pilot_cfg);
    let phi_follow = phi_of(follow_cfg);
    if phi_init == 0.0 {
        return Err(Error::domain("pilot calling probability is zero; nothing can be observed"));
    }

    let outcomes: Vec<FoldOutcome> = (0..folds.len())
        .into_par_iter()
        .map(|k| run_fold(matrix, &folds, k, cfg, phi_init, phi_follow))
        .collect::<Result<_>>()?;

    let fold_size = folds[0].len();
    let curves = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(i, m)| summarize(&m.to_string(), fold_size, outcomes.iter().map(|o| &o.predictions[i])))
        .collect::<Result<Vec<_>>>()?;
    let truth = summarize(TRUTH_TAG, fold_size, outcomes.iter().map(|o| &o.truth))?;
    Ok(EvalReport {
        methods: cfg.methods.clone(),
        folds: outcomes,
        curves,
        truth,
        fold_size,
        phi_init,
        phi_follow,
    })
}

fn run_fold(
    matrix: &VariantMatrix,
    folds: &[Vec<usize>],
    k: usize,
    cfg: &EvalConfig,
    phi_init: f64,
    phi_follow: f64,
) -> Result<FoldOutcome> {
    let [pilot_seed, follow_seed, fit_seed] = fold_seeds(cfg.seed, k);
    let follow_idx: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    let pilot = thin_matrix(&matrix.select_rows(&folds[k])?, phi_init, pilot_seed)?;
    let follow = thin_matrix(&matrix.select_rows(&follow_idx)?, phi_follow, follow_seed)?;

    let n = pilot.n_samples();
    let horizon = follow.n_samples();
    let seen: HashSet<usize> = pilot.rows().iter().flatten().copied().collect();
    let pilot_distinct = seen.len();
    let mut new = HashSet::new();
    let mut truth = Vec::with_capacity(horizon + 1);
    truth.push(pilot_distinct as f64);
    for row in follow.rows() {
        new.extend(row.iter().copied().filter(|j| !seen.contains(j)));
        truth.push((pilot_distinct + new.len()) as f64);
    }

    let sfs = build_sfs(&pilot);
    let base = pilot_distinct as f64;
    let mut fitted = None;
    let mut jackknife_order = None;
    let mut predictions = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let curve: Vec<f64> = match *method {
            Method::Bnp => {
                let res: FitResult = fit::fit_hyperparams(&pilot, phi_init, &DEOptions::for_hyperparams(fit_seed))?;
                fitted = Some(res.params);
                let new = if phi_init == 1.0 && phi_follow == 1.0 {
                    bnp::new_variants_curve(n as u64, horizon as u64, &res.params)
                } else {
                    bnp::noisy_new_variants_curve(n as u64, horizon as u64, &res.params, phi_init, phi_follow)?
                };
                std::iter::once(base).chain(new.into_iter().map(|v| base + v)).collect()
            }
            Method::BetaBernoulli => {
                if sfs.is_empty() {
                    vec![base; horizon + 1]
                } else {
                    let bb = baselines::bb_fit(&sfs)?;
                    (0..=horizon as u64).map(|m| base + baselines::bb_predict(&sfs, &bb, m)).collect()
                }
            }
            Method::Jackknife(order) => {
                let p = match order {
                    JackknifeOrder::Fixed(p) => p,
                    JackknifeOrder::Auto => {
                        let p = baselines::jackknife_order_select(&sfs, horizon as u64, 0.05)?;
                        jackknife_order = Some(p);
                        p
                    }
                };
                (0..=horizon as u64)
                    .map(|m| baselines::jackknife_predict(&sfs, m, p))
                    .collect::<Result<_>>()?
            }
            Method::GoodToulmin(b) => (0..=horizon as u64)
                .map(|m| base + baselines::good_toulmin(&sfs, m, b, None))
                .collect(),
        };
        predictions.push(curve);
    }
    Ok(FoldOutcome {
        fold: k,
        pilot_distinct,
        truth,
        predictions,
        fitted,
        jackknife_order,
    })
}

/// Per-`m` mean and sample standard deviation across folds.
fn summarize<'a>(tag: &str, pilot_size: usize, curves: impl Iterator<Item = &'a Vec<f64>>) -> Result<PredictionCurve> {
    let curves: Vec<&Vec<f64>> = curves.collect();
    let k = curves.len() as f64;
    let len = curves.first().map_or(0, |c| c.len());
    let points = (0..len)
        .map(|m| {
            let mean = curves.iter().map(|c| c[m]).sum::<f64>() / k;
            let var = if k > 1.0 {
                curves.iter().map(|c| (c[m] - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            let std = var.sqrt();
            CurvePoint { m, mean, std, lo: mean - std, hi: mean + std }
        })
        .collect();
    PredictionCurve::new(tag, pilot_size, points)
}

/// Provenance written next to the curve CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub n_folds: usize,
    pub fold_size: usize,
    pub contiguous: bool,
    pub methods: Vec<String>,
    pub pilot_config: Option<SequencingConfig>,
    pub follow_config: Option<SequencingConfig>,
    pub phi_init: f64,
    pub phi_follow: f64,
    pub de_options: DEOptions,
    pub fitted_hyperparams: Vec<Option<BPHyperParams>>,
    pub jackknife_orders: Vec<Option<usize>>,
}

impl RunMetadata {
    pub fn new(report: &EvalReport, cfg: &EvalConfig, pilot: Option<&SequencingConfig>, follow: Option<&SequencingConfig>) -> Self {
        Self {
            seed: cfg.seed,
            n_folds: cfg.n_folds,
            fold_size: report.fold_size,
            contiguous: cfg.contiguous,
            methods: cfg.methods.iter().map(Method::to_string).collect(),
            pilot_config: pilot.copied(),
            follow_config: follow.copied(),
            phi_init: report.phi_init,
            phi_follow: report.phi_follow,
            de_options: DEOptions::for_hyperparams(0),
            fitted_hyperparams: report.folds.iter().map(|f| f.fitted).collect(),
            jackknife_orders: report.folds.iter().map(|f| f.jackknife_order).collect(),
        }
    }
}

/// Path of the JSON sidecar for a curve CSV.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

const HEADER: [&str; 7] = ["method", "m", "total_mean", "total_std", "lo", "hi", "truth"];

/// Writes curves as CSV (truth column left empty where unavailable) and the
/// metadata as a JSON sidecar.
pub fn emit_curves<M: Serialize>(
    curves: &[PredictionCurve],
    truth: Option<&PredictionCurve>,
    metadata: &M,
    path: &Path,
) -> Result<()> {
    let wrap = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(HEADER).map_err(wrap)?;
    for c in curves {
        for p in c.points() {
            let t = truth.and_then(|t| t.at(p.m)).map(|t| t.mean.to_string()).unwrap_or_default();
            w.write_record([
                c.method().to_string(),
                p.m.to_string(),
                p.mean.to_string(),
                p.std.to_string(),
                p.lo.to_string(),
                p.hi.to_string(),
                t,
            ])
            .map_err(wrap)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    crate::io::write_json(metadata, &sidecar_path(path))
}

/// Reads curves written by [`emit_curves`]. Returns the method curves in file
/// order and the truth means keyed by `m` per method.
pub fn read_curves(path: &Path, pilot_size: usize) -> Result<(Vec<PredictionCurve>, Vec<Vec<Option<f64>>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let headers = rdr.headers().map_err(|e| Error::io(path, e.into()))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("header must be `{}`", HEADER.join(",")),
        });
    }
    let mut out: Vec<(String, Vec<CurvePoint>, Vec<Option<f64>>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let perr = |m: String| Error::Parse { path: path.into(), line, message: m };
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        let num = |k: usize| rec[k].parse::<f64>().map_err(|e| perr(format!("{}: {e}", HEADER[k])));
        let point = CurvePoint {
            m: rec[1].parse().map_err(|e| perr(format!("m: {e}")))?,
            mean: num(2)?,
            std: num(3)?,
            lo: num(4)?,
            hi: num(5)?,
        };
        let truth = if rec[6].is_empty() { None } else { Some(num(6)?) };
        match out.last_mut() {
            Some((tag, pts, tr)) if tag == &rec[0] => {
                pts.push(point);
                tr.push(truth);
            }
            _ => out.push((rec[0].to_string(), vec![point], vec![truth])),
        }
    }
    let mut curves = Vec::with_capacity(out.len());
    let mut truths = Vec::with_capacity(out.len());
    for (tag, pts, tr) in out {
        curves.push(PredictionCurve::new(tag, pilot_size, pts)?);
        truths.push(tr);
    }
    Ok((curves, truths))
}
