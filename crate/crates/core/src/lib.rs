//! Contrastive neural ratio estimation.
//!
//! A classifier `h_w(theta, x)` is trained to tell dependent `(theta, x)`
//! pairs from independent ones among `K` candidate parameters. At the optimum
//! `h_w` equals the log likelihood-to-evidence ratio `log p(x|theta)/p(x)`,
//! which turns the prior into an amortized posterior.
//!
//! * [`nn`]: dense matrices, the residual ratio network, Adam, standardization.
//! * [`tasks`]: priors and simulators, including an analytic Gaussian task.
//! * [`loss`]: the NRE-A/B/C losses and contrastive batch assembly.
//! * [`train`]: the training loop, checkpoints and validation metrics.
//! * [`posterior`]: surrogate posteriors, partition estimates, samplers.
//! * [`diagnostics`]: ROC, mutual-information bounds, C2ST.

pub mod diagnostics;
pub mod error;
pub mod loss;
pub mod math;
pub mod nn;
pub mod posterior;
pub mod rng;
pub mod tasks;
pub mod train;

pub use error::{Error, Result};
pub use nn::Matrix;
