use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters `(alpha, sigma, c)` of the three-parameter beta process.
///
/// `alpha > 0` is the mass, `sigma` in `[0, 1)` the discount (power-law
/// exponent) and `c > -sigma` the concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct BPHyperParams {
    alpha: f64,
    sigma: f64,
    c: f64,
}

#[derive(Deserialize)]
struct RawParams {
    alpha: f64,
    sigma: f64,
    c: f64,
}

impl TryFrom<RawParams> for BPHyperParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        validate_hyperparams(r.alpha, r.sigma, r.c)
    }
}

/// Checks the beta-process restrictions, naming the first violated bound.
pub fn validate_hyperparams(alpha: f64, sigma: f64, c: f64) -> Result<BPHyperParams> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Constraint(format!("alpha must be > 0 (got {alpha})")));
    }
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::Constraint(format!(
            "sigma must lie in [0, 1) (got {sigma})"
        )));
    }
    if !(c.is_finite() && c + sigma > 0.0) {
        return Err(Error::Constraint(format!(
            "c must be > -sigma = {} (got {c})",
            -sigma
        )));
    }
    Ok(BPHyperParams { alpha, sigma, c })
}

impl BPHyperParams {
    pub fn new(alpha: f64, sigma: f64, c: f64) -> Result<Self> {
        validate_hyperparams(alpha, sigma, c)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Same sigma and c with a different mass.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        validate_hyperparams(alpha, self.sigma, self.c)
    }
}

/// Sequencing conditions: Poisson read depth `depth`, calling threshold and
/// per-read error probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct SequencingConfig {
    depth: f64,
    threshold: u32,
    p_err: f64,
}

#[derive(Deserialize)]
struct RawConfig {
    depth: f64,
    threshold: u32,
    p_err: f64,
}

impl TryFrom<RawConfig> for SequencingConfig {
    type Error = Error;

    fn try_from(r: RawConfig) -> Result<Self> {
        SequencingConfig::new(r.depth, r.threshold, r.p_err)
    }
}

impl SequencingConfig {
    pub fn new(depth: f64, threshold: u32, p_err: f64) -> Result<Self> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::Constraint(format!("depth must be > 0 (got {depth})")));
        }
        if threshold == 0 {
            return Err(Error::Constraint("threshold must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&p_err) {
            return Err(Error::Constraint(format!(
                "p_err must lie in [0, 1) (got {p_err})"
            )));
        }
        Ok(Self {
            depth,
            threshold,
            p_err,
        })
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn p_err(&self) -> f64 {
        self.p_err
    }

    /// Mean number of error-free reads per locus.
    pub fn effective_depth(&self) -> f64 {
        self.depth * (1.0 - self.p_err)
    }

    /// Same threshold and error rate at another depth.
    pub fn with_depth(&self, depth: f64) -> Result<Self> {
        Self::new(depth, self.threshold, self.p_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_figure_parameters() {
        assert!(validate_hyperparams(20.0, 0.1, 1.0).is_ok());
        assert!(validate_hyperparams(60.0, 0.5, 1.0).is_ok());
        assert!(validate_hyperparams(1.0, 0.0, 0.5).is_ok());
    }

    #[test]
    fn rejects_each_bound() {
        let msg = |r: Result<BPHyperParams>| r.unwrap_err().to_string();
        assert!(msg(validate_hyperparams(0.0, 0.1, 1.0)).contains("alpha"));
        assert!(msg(validate_hyperparams(1.0, 1.0, 1.0)).contains("sigma"));
        assert!(msg(validate_hyperparams(1.0, -0.1, 1.0)).contains("sigma"));
        assert!(msg(validate_hyperparams(1.0, 0.5, -0.5)).contains("c must be"));
        assert!(validate_hyperparams(f64::NAN, 0.5, 1.0).is_err());
    }

    #[test]
    fn json_roundtrip_validates() {
        let p = BPHyperParams::new(20.0, 0.1, 1.0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: BPHyperParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        let bad = r#"{"alpha": 1.0, "sigma": 0.5, "c": -0.5}"#;
        assert!(serde_json::from_str::<BPHyperParams>(bad).is_err());
    }

    #[test]
    fn sequencing_bounds() {
        assert!(SequencingConfig::new(45.0, 30, 0.01).is_ok());
        assert!(SequencingConfig::new(0.0, 30, 0.01).is_err());
        assert!(SequencingConfig::new(45.0, 0, 0.01).is_err());
        assert!(SequencingConfig::new(45.0, 30, 1.0).is_err());
    }
}
