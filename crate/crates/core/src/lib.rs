//! Bayes estimation of the general failure rate model `r(t) = a + b t^(θ-1)`
//! from Type-II censored samples, with `(a, b)` drawn from a
//! Farlie-Gumbel-Morgenstern bivariate exponential prior.
//!
//! * [`model`]: hazard, survival, prior and marginal lifetime densities
//! * [`sample`]: censored samples and their sufficient statistics
//! * [`posterior`]: posterior normalizer, density and the six estimators
//! * [`mcmc`]: Metropolis-Hastings generation of censored samples
//! * [`oracle`]: brute-force quadrature and enumeration cross-checks
//! * [`harness`]: sweeps, variances and empirical Bayes risks as CSV
//!
//! ```
//! use gfr_bayes::model::ModelConfig;
//! use gfr_bayes::posterior::{EntropyMode, LossConstants, PosteriorContext};
//! use gfr_bayes::sample::CensoredSample;
//!
//! let cfg = ModelConfig::new(1.5, 0.1, 0.2, 0.5).unwrap();
//! let sample = CensoredSample::new(20, 4, vec![0.05, 0.11, 0.2, 0.31]).unwrap();
//! let ctx = PosteriorContext::new(cfg, &sample).unwrap();
//! let loss = LossConstants::new(5.0, 10.0).unwrap();
//! let est = ctx.estimate(&loss, EntropyMode::DropDivergent).unwrap();
//! assert!(est.a_bl <= est.a_bs);
//! ```

pub mod model;
pub mod sample;
pub mod posterior;
pub mod oracle;
pub mod mcmc;
pub mod stats;
pub mod harness;
