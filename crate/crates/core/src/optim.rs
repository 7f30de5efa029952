//! Derivative-free minimizers: differential evolution over a box and
//! Nelder–Mead simplex search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings for [`differential_evolution`] (rand/1/bin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DEOptions {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_rate: f64,
    /// Mutation scale used when `dither` is `None`.
    pub differential_weight: f64,
    /// Per-generation mutation scale drawn uniformly from this range.
    pub dither: Option<(f64, f64)>,
    /// Stop once the best objective improves by less than this relative
    /// amount over `stagnation_window` generations.
    pub tolerance: f64,
    pub stagnation_window: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
}

impl Default for DEOptions {
    fn default() -> Self {
        Self {
            population_size: 40,
            max_generations: 300,
            crossover_rate: 0.9,
            differential_weight: 0.8,
            dither: Some((0.5, 1.0)),
            tolerance: 1e-8,
            stagnation_window: 30,
            seed: 0,
            bounds: Vec::new(),
        }
    }
}

impl DEOptions {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 8 {
            return Err(Error::invalid(format!(
                "population size must be >= 8 (got {})",
                self.population_size
            )));
        }
        if self.bounds.is_empty() {
            return Err(Error::invalid("search box has no dimensions"));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("bound {i} is not a finite interval: [{lo}, {hi}]")));
            }
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::invalid("crossover rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DEResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best value in the initial population.
    pub initial_best: f64,
    pub evaluations: usize,
    pub generations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Minimizes `f` over the box in `opts.bounds`.
///
/// Trial vectors are generated serially from the seeded generator and then
/// evaluated in parallel, so the result is identical for any thread count.
pub fn differential_evolution<F>(f: F, opts: &DEOptions) -> Result<DEResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    opts.validate()?;
    let dim = opts.bounds.len();
    let np = opts.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            opts.bounds
                .iter()
                .map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                .collect()
        })
        .collect();
    let mut fit: Vec<f64> = pop.par_iter().map(|x| sanitize(f(x))).collect();
    let mut evaluations = np;
    let initial_best = fit[argmin(&fit)];

    let mut history = vec![initial_best];
    let mut converged = false;
    let mut generations = 0;
    for _ in 0..opts.max_generations {
        generations += 1;
        let scale = match opts.dither {
            Some((lo, hi)) => lo + rng.random::<f64>() * (hi - lo),
            None => opts.differential_weight,
        };
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let pick = |rng: &mut ChaCha8Rng, taken: &[usize]| loop {
                    let r = rng.random_range(0..np);
                    if !taken.contains(&r) {
                        return r;
                    }
                };
                let r1 = pick(&mut rng, &[i]);
                let r2 = pick(&mut rng, &[i, r1]);
                let r3 = pick(&mut rng, &[i, r1, r2]);
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|d| {
                        let cross = rng.random::<f64>() < opts.crossover_rate || d == forced;
                        if !cross {
                            return pop[i][d];
                        }
                        let v = pop[r1][d] + scale * (pop[r2][d] - pop[r3][d]);
                        let (lo, hi) = opts.bounds[d];
                        // Out-of-box components land halfway back toward the parent.
                        if v < lo {
                            0.5 * (lo + pop[i][d])
                        } else if v > hi {
                            0.5 * (hi + pop[i][d])
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_fit: Vec<f64> = trials.par_iter().map(|x| sanitize(f(x))).collect();
        evaluations += np;
        for (i, (x, v)) in trials.into_iter().zip(trial_fit).enumerate() {
            if v <= fit[i] {
                pop[i] = x;
                fit[i] = v;
            }
        }
        let best = fit[argmin(&fit)];
        history.push(best);
        if history.len() > opts.stagnation_window {
            let past = history[history.len() - 1 - opts.stagnation_window];
            if past - best <= opts.tolerance * past.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }
    let b = argmin(&fit);
    Ok(DEResult {
        x: pop[b].clone(),
        value: fit[b],
        initial_best,
        evaluations,
        generations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead with standard coefficients, started from `x0` with initial
/// edge length `step`. Stops when the spread of simplex values falls below
/// `ftol` (absolute plus relative) or after `max_iter` iterations.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: f64, ftol: f64, max_iter: usize) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    let eval = |x: &[f64]| sanitize(f(x));
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for d in 0..dim {
        let mut x = x0.to_vec();
        x[d] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[dim]);
        if worst.is_finite() && worst - best <= ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|x| x[d]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |t: f64| -> Vec<f64> {
            (0..dim)
                .map(|d| centroid[d] + t * (simplex[dim][d] - centroid[d]))
                .collect()
        };

        let xr = toward(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = toward(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        // Outside contraction if the reflection beat the worst point, inside otherwise.
        let xc = toward(if fr < values[dim] { -0.5 } else { 0.5 });
        let fc = eval(&xc);
        if fc < values[dim].min(fr) || (fr < values[dim] && fc <= fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        for i in 1..=dim {
            let x: Vec<f64> = (0..dim)
                .map(|d| simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]))
                .collect();
            values[i] = eval(&x);
            simplex[i] = x;
        }
    }
    let b = argmin(&values);
    SimplexResult {
        x: simplex[b].clone(),
        value: values[b],
        iterations,
        converged,
    }
}
