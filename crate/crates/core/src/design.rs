//! Budgeted choice of follow-up size and sequencing depth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnp;
use crate::error::{Error, Result};
use crate::noise::calling_probability;
use crate::params::{BPHyperParams, SequencingConfig};

/// Cost of sequencing `m` samples at depth `lambda`.
pub trait CostModel: Sync {
    fn cost(&self, m: u64, lambda: f64) -> Result<f64>;

    /// Largest `m` with `cost(m, lambda) <= budget`.
    fn max_m_under_budget(&self, lambda: f64, budget: f64) -> Result<u64>;
}

/// `C(M, λ) = M ln λ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MLogLambda;

impl MLogLambda {
    fn unit(lambda: f64) -> Result<f64> {
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(Error::domain(format!(
                "cost M*ln(lambda) needs lambda > 1 (got {lambda})"
            )));
        }
        Ok(lambda.ln())
    }
}

impl CostModel for MLogLambda {
    fn cost(&self, m: u64, lambda: f64) -> Result<f64> {
        Ok(m as f64 * Self::unit(lambda)?)
    }

    fn max_m_under_budget(&self, lambda: f64, budget: f64) -> Result<u64> {
        let unit = Self::unit(lambda)?;
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::invalid(format!("budget must be finite and >= 0 (got {budget})")));
        }
        let mut m = (budget / unit).floor() as u64;
        // Guard against rounding in the division.
        while m > 0 && m as f64 * unit > budget {
            m -= 1;
        }
        while (m + 1) as f64 * unit <= budget {
            m += 1;
        }
        Ok(m)
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi.is_finite() && hi >= lo && n >= 1) {
        return Err(Error::invalid(format!("bad grid specification {lo},{hi},{n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

pub struct DesignProblem<C: CostModel = MLogLambda> {
    pub fitted: BPHyperParams,
    pub pilot_n: u64,
    pub pilot_cfg: SequencingConfig,
    pub budget: f64,
    pub cost_model: C,
    pub lambda_grid: Vec<f64>,
    pub rare_cap: Option<u64>,
}

impl DesignProblem<MLogLambda> {
    /// Default cost model and 64 log-spaced depths in `[2, 100]`.
    pub fn new(fitted: BPHyperParams, pilot_n: u64, pilot_cfg: SequencingConfig, budget: f64) -> Self {
        Self {
            fitted,
            pilot_n,
            pilot_cfg,
            budget,
            cost_model: MLogLambda,
            lambda_grid: log_grid(2.0, 100.0, 64).expect("valid default grid"),
            rare_cap: None,
        }
    }
}

impl<C: CostModel> DesignProblem<C> {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::invalid("depth grid is empty"));
        }
        if self.lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("depth grid must be strictly increasing"));
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return Err(Error::invalid(format!("budget must be > 0 (got {})", self.budget)));
        }
        if self.rare_cap == Some(0) {
            return Err(Error::invalid("rare-variant cap R must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub lambda_follow: f64,
    pub phi_follow: f64,
    pub m_max: u64,
    pub predicted: f64,
    pub cost: f64,
}

/// Predicted new (or new rare) variants for a follow-up of `m` samples.
pub fn predict_design(
    fitted: &BPHyperParams,
    pilot_n: u64,
    m: u64,
    phi_init: f64,
    phi_follow: f64,
    rare_cap: Option<u64>,
) -> Result<f64> {
    if m == 0 {
        return Ok(0.0);
    }
    match rare_cap {
        // At most R occurrences with R >= M is every new variant.
        Some(r) if r < m => bnp::expected_new_rare_noisy_cum(pilot_n, m, r, fitted, phi_init, phi_follow),
        _ => bnp::expected_new_variants_noisy(pilot_n, m, fitted, phi_init, phi_follow),
    }
}

/// Evaluates every grid depth at its largest affordable follow-up size.
pub fn sweep_designs<C: CostModel>(problem: &DesignProblem<C>) -> Result<Vec<DesignPoint>> {
    problem.validate()?;
    let phi_init = calling_probability(&problem.pilot_cfg);
    problem
        .lambda_grid
        .par_iter()
        .map(|&lambda| {
            let follow = problem.pilot_cfg.with_depth(lambda)?;
            let phi_follow = calling_probability(&follow);
            let m = problem.cost_model.max_m_under_budget(lambda, problem.budget)?;
            let predicted = predict_design(&problem.fitted, problem.pilot_n, m, phi_init, phi_follow, problem.rare_cap)?;
            Ok(DesignPoint {
                lambda_follow: lambda,
                phi_follow,
                m_max: m,
                predicted,
                cost: problem.cost_model.cost(m, lambda)?,
            })
        })
        .collect()
}

/// First point attaining the maximum prediction (smallest depth on ties).
pub fn best_point(points: &[DesignPoint]) -> Result<DesignPoint> {
    let mut best: Option<&DesignPoint> = None;
    for p in points {
        if !p.predicted.is_finite() {
            return Err(Error::Numerical {
                message: format!("non-finite prediction at depth {}", p.lambda_follow),
                previous: p.predicted,
                last: p.predicted,
            });
        }
        if best.is_none_or(|b| p.predicted > b.predicted) {
            best = Some(p);
        }
    }
    best.copied().ok_or_else(|| Error::invalid("design sweep is empty"))
}

pub fn optimize_design<C: CostModel>(problem: &DesignProblem<C>) -> Result<DesignPoint> {
    best_point(&sweep_designs(problem)?)
}
