//! Bifractional Brownian motion: covariance kernels, exact path samplers,
//! Monte Carlo functionals of the running supremum, and statistical checks
//! of the comparison inequalities against scaled fractional Brownian motion.

pub mod error;
pub mod estimators;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use estimators::{Drift, FunctionalDescriptor, McEstimate, Transform};
pub use grid::TimeGrid;
pub use harness::{CheckFamily, CheckResult, SweepConfig, Verdict};
pub use kernels::{Comparison, KernelKind, KernelParams};
pub use sampling::{PathBatch, Process};
