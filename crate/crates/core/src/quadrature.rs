//! Quadrature for expectations under a Beta(a, b) law.
//!
//! The primary rule is Gauss-Jacobi adapted to the Beta weight
//! `x^{a-1} (1-x)^{b-1} / B(a, b)` on `[0, 1]`, built by Golub-Welsch from the
//! three-term recurrence of the Jacobi polynomials. Orders are doubled until
//! two successive estimates agree to [`REL_TOL`]; past [`MAX_ORDER`] a graded
//! composite rule takes over, which resolves boundary layers of width far
//! below the smallest Gauss-Jacobi node.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative agreement required between successive estimates.
pub const REL_TOL: f64 = 1e-10;
/// Largest single-panel Gauss-Jacobi order tried.
pub const MAX_ORDER: usize = 512;

const FIRST_ORDER: usize = 8;
/// Left end of the geometric panel grid used by the composite fallback.
const GRADED_START: f64 = 1.0 / (1u64 << 46) as f64;
const GRADED_ORDERS: [usize; 3] = [16, 32, 64];

/// Nodes and weights with `Σ w_i g(x_i) ≈ E[g(B)]`, `B ~ Beta(a, b)`.
#[derive(Debug, Clone)]
pub struct BetaRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BetaRule {
    /// Gauss-Jacobi rule of the given order for the Beta(a, b) weight.
    ///
    /// Exact for polynomials of degree `<= 2 * order - 1`.
    pub fn gauss_jacobi(a: f64, b: f64, order: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || order == 0 {
            return Err(Error::domain(format!(
                "Gauss-Jacobi needs a, b > 0 and order >= 1 (got a = {a}, b = {b}, order = {order})"
            )));
        }
        // Jacobi exponents on [-1, 1] with x = (1 + t) / 2.
        let alpha = b - 1.0;
        let beta = a - 1.0;
        let ab = alpha + beta;

        let mut diag = vec![0.0; order];
        let mut off = vec![0.0; order];
        diag[0] = (beta - alpha) / (ab + 2.0);
        for k in 1..order {
            let kf = k as f64;
            let s = 2.0 * kf + ab;
            diag[k] = (beta - alpha) * (beta + alpha) / (s * (s + 2.0));
            let sq = if k == 1 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab)
                    / (s * s * (s + 1.0) * (s - 1.0))
            };
            off[k] = sq.sqrt();
        }
        // Map to [0, 1].
        for d in diag.iter_mut() {
            *d = 0.5 * (1.0 + *d);
        }
        for e in off.iter_mut() {
            *e *= 0.5;
        }

        let (nodes, first) = tridiagonal_eigen(diag, off)?;
        let mut pairs: Vec<(f64, f64)> = nodes
            .into_iter()
            .zip(first)
            .map(|(x, z)| (x.clamp(0.0, 1.0), z * z))
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    /// Composite rule on a geometric grid `0, s, 2s, 4s, …, 1/2, 1`.
    ///
    /// The end panels carry the algebraic endpoint singularities through
    /// Gauss-Jacobi rules; interior panels use Gauss-Legendre with the full
    /// Beta density folded into the weights.
    pub fn graded(a: f64, b: f64, order: usize) -> Result<Self> {
        let ln_norm = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();

        // [0, s]: x = s u, weight u^{a-1} handled by Beta(a, 1).
        let s = GRADED_START;
        let left = Self::gauss_jacobi(a, 1.0, order)?;
        let ln_scale = a * s.ln() - a.ln() - ln_norm;
        for (&u, &w) in left.nodes.iter().zip(&left.weights) {
            let x = s * u;
            nodes.push(x);
            weights.push(w * (ln_scale + (b - 1.0) * (-x).ln_1p()).exp());
        }

        // Interior panels [x, 2x] up to 1/2.
        let legendre = Self::gauss_jacobi(1.0, 1.0, order)?;
        let mut lo = s;
        while lo < 0.5 {
            let hi = (2.0 * lo).min(0.5);
            let width = hi - lo;
            for (&u, &w) in legendre.nodes.iter().zip(&legendre.weights) {
                let x = lo + width * u;
                let ln_dens = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_norm;
                nodes.push(x);
                weights.push(w * width * ln_dens.exp());
            }
            lo = hi;
        }

        // [1/2, 1]: 1 - x = v / 2, weight v^{b-1} handled by Beta(b, 1).
        let right = Self::gauss_jacobi(b, 1.0, order)?;
        let ln_scale = -b * std::f64::consts::LN_2 - b.ln() - ln_norm;
        for (&v, &w) in right.nodes.iter().zip(&right.weights) {
            let x = 1.0 - 0.5 * v;
            nodes.push(x);
            weights.push(w * (ln_scale + (a - 1.0) * x.ln()).exp());
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i g(x_i)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix (implicit QL with Wilkinson-type shifts). `off[k]` couples rows
/// `k - 1` and `k`; `off[0]` is ignored.
fn tridiagonal_eigen(mut d: Vec<f64>, off: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[1..n]);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numerical {
                    message: "tridiagonal QL iteration did not converge".into(),
                    previous: d[l],
                    last: e[l],
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

fn max_rel_diff(new: &[f64], old: &[f64]) -> f64 {
    new.iter()
        .zip(old)
        .map(|(&x, &y)| {
            let diff = (x - y).abs();
            if diff == 0.0 {
                0.0
            } else {
                diff / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}

/// Shape hints for an integrand `g` on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape {
    /// Polynomial degree of `g`, when `g` is a polynomial.
    pub degree: Option<u64>,
    /// Rate `k` with `g(x) ≈ exp(-k x)` near the origin.
    pub decay: f64,
}

/// Drives a vector-valued Beta expectation to convergence.
///
/// `eval` maps a rule to the estimates. A Gauss-Jacobi order large enough
/// for the known polynomial degree stops at once (the rule is then exact).
/// The starting order puts several nodes inside the boundary layer of width
/// `1 / decay`; decays too sharp for [`MAX_ORDER`] go straight to the graded
/// composite rule.
pub(crate) fn converge<F>(a: f64, b: f64, shape: Shape, eval: F) -> Result<Vec<f64>>
where
    F: Fn(&BetaRule) -> Vec<f64>,
{
    let wanted = (4.0 * shape.decay.max(0.0).sqrt()).ceil();
    let mut order = if wanted > MAX_ORDER as f64 {
        2 * MAX_ORDER
    } else {
        (wanted as usize).max(FIRST_ORDER).next_power_of_two()
    };
    if let Some(deg) = shape.degree {
        // Smallest exact order, when it is cheaper than the decay-driven one.
        let exact = (deg / 2 + 1) as usize;
        if exact <= order.min(MAX_ORDER) {
            let rule = BetaRule::gauss_jacobi(a, b, exact.max(1))?;
            return Ok(eval(&rule));
        }
    }
    let mut previous: Option<Vec<f64>> = None;
    while order <= MAX_ORDER {
        let rule = BetaRule::gauss_jacobi(a, b, order)?;
        let est = eval(&rule);
        if let Some(prev) = &previous {
            if max_rel_diff(&est, prev) < REL_TOL {
                return Ok(est);
            }
        }
        previous = Some(est);
        order *= 2;
    }

    let mut previous: Option<Vec<f64>> = None;
    for order in GRADED_ORDERS {
        let est = eval(&BetaRule::graded(a, b, order)?);
        if let Some(prev) = &previous {
            if max_rel_diff(&est, prev) < REL_TOL {
                return Ok(est);
            }
            if order == GRADED_ORDERS[GRADED_ORDERS.len() - 1] {
                return Err(non_convergence(&est, prev));
            }
        }
        previous = Some(est);
    }
    unreachable!("graded escalation returns on its last order")
}

fn non_convergence(last: &[f64], prev: &[f64]) -> Error {
    let worst = (0..last.len())
        .max_by(|&i, &j| {
            max_rel_diff(&last[i..=i], &prev[i..=i]).total_cmp(&max_rel_diff(&last[j..=j], &prev[j..=j]))
        })
        .unwrap_or(0);
    Error::Numerical {
        message: format!("Beta quadrature did not reach relative tolerance {REL_TOL:e}"),
        previous: prev.get(worst).copied().unwrap_or(f64::NAN),
        last: last.get(worst).copied().unwrap_or(f64::NAN),
    }
}

/// `E[(1 - phi1 B)^{e1} (1 - phi2 B)^{e2}]` for `B ~ Beta(a, b)`.
pub fn beta_expectation(a: f64, b: f64, phi1: f64, e1: u64, phi2: f64, e2: u64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!(
            "Beta expectation needs a, b > 0 (got a = {a}, b = {b})"
        )));
    }
    for phi in [phi1, phi2] {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::domain(format!("phi must lie in [0, 1] (got {phi})")));
        }
    }
    let e1 = if phi1 == 0.0 { 0 } else { e1 };
    let e2 = if phi2 == 0.0 { 0 } else { e2 };
    if e1 == 0 && e2 == 0 {
        return Ok(1.0);
    }
    let (f1, f2) = (e1 as f64, e2 as f64);
    let g = move |x: f64| (f1 * (-phi1 * x).ln_1p() + f2 * (-phi2 * x).ln_1p()).exp();
    let shape = Shape {
        degree: Some(e1 + e2),
        decay: phi1 * f1 + phi2 * f2,
    };
    let est = converge(a, b, shape, |rule| vec![rule.integrate(g)])?;
    Ok(est[0].clamp(0.0, 1.0))
}
