//! Federated binary classification with sparse kernel expansions.
//!
//! Models are coefficient functions over a discretized center/width space:
//! `f(x)` is the quadrature of `alpha(s, w) k(x, s; w)` against a Gaussian
//! kernel family. Training minimizes an elastic-net objective (squared mass
//! plus a support penalty) under per-sample margin constraints and runs in
//! the dual domain, where projected gradient ascent over one nonnegative
//! multiplier per sample yields a closed-form thresholded solution.
//!
//! The dual multipliers double as a communication filter: in the federated
//! setting each agent solves its local problem and transmits only samples
//! with positive multipliers; the server pools those critical samples and
//! re-solves. A centralized baseline, the synthetic benchmark task, and an
//! accelerometer ingester round out the toolkit.

pub mod datasets;
pub mod error;
pub mod federation;
pub mod grid;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{cross_gram, eval_kernel, KernelFamily, QuadratureGrid};
pub use model::{alpha_bar, threshold, CoefficientField, Hyperparams, LabeledSample};
pub use solver::{
    ascend, ascend_with, critical_samples, decomposition_gap, dual_gradient, dual_value,
    strong_concavity_certificate, AscendOptions, DualState, LambdaInit, SolveResult, TheoryBound,
};
