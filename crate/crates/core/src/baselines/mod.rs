//! Comparison predictors that see only the site-frequency spectrum.

pub mod beta_bernoulli;
pub mod good_toulmin;
pub mod jackknife;

pub use beta_bernoulli::{bb_fit, bb_loglik, bb_predict, BetaBernoulliFit};
pub use good_toulmin::{good_toulmin, SmoothingBase};
pub use jackknife::{jackknife_order_select, jackknife_predict, population_jackknife};
