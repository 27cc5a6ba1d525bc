//! Path functionals and Monte Carlo estimation.

mod functional;
mod mc;
mod sum;

pub use functional::{
    apply_functional, path_functionals, Base, Drift, FunctionalDescriptor, FunctionalSet, PathFunctionals,
    Transform,
};
pub use mc::{
    functional_values, integrated_tail, integrated_tail_from_values, mc_estimate, proportion, tail_curve,
    tail_curve_from_values, IntegratedTail, McEstimate, TailPoint,
};
pub use sum::CompensatedSum;
