//! Predicting and maximizing genetic variant discovery.
//!
//! A pilot study of `N` sequenced individuals is summarized as a sparse
//! [`VariantMatrix`]. The three-parameter beta process gives closed-form
//! Poisson posterior predictives for the number of new (and new rare)
//! variants a follow-up of size `M` will reveal, both under perfect
//! observation and when variant calling succeeds only with probability
//! `phi` that depends on sequencing depth. Hyperparameters are fitted by
//! empirical Bayes ([`fit`]), and the predictor drives a budgeted
//! quality-versus-quantity design search ([`design`]).
//!
//! Baseline estimators ([`baselines`]), synthetic data generators
//! ([`simulate`]) and a fold-based evaluation harness ([`harness`]) are
//! included for comparison and validation.

pub mod baselines;
pub mod bnp;
pub mod curve;
pub mod design;
pub mod error;
pub mod fit;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod noise;
pub mod optim;
pub mod params;
pub mod quadrature;
pub mod sfs;
pub mod simulate;
pub mod special;

pub use curve::{CurvePoint, PredictionCurve};
pub use error::{Error, Result};
pub use matrix::VariantMatrix;
pub use params::{validate_hyperparams, BPHyperParams, SequencingConfig};
pub use sfs::{build_sfs, SiteFrequencySpectrum};
