//! Bayesian optimization with hierarchical uncertainty quantification:
//! Gaussian-process surrogates with polynomial trends, a conjugate
//! inverse-gamma layer on the process variance, Student-t expected
//! improvement, classic acquisition baselines, space-filling designs,
//! and a benchmark harness.
//!
//! The crate is organized bottom-up:
//!
//! * [`special`] — scalar special functions (gamma, beta, Student-t).
//! * [`kernel`] — Matern / squared-exponential correlation with cached
//!   factorizations and nugget escalation.
//! * [`trend`] — polynomial trend bases and BIC order selection.
//! * [`gp`] — generalized least squares fits, kriging prediction, and
//!   the hierarchical posterior.
//! * [`hyper`] — marginal likelihood of the variance prior and the
//!   regularized hyperparameter estimators.
//! * [`acquisition`] — expected improvement in Gaussian and Student
//!   forms, confidence bounds, and the wrapper policies.
//! * [`design`] — box domains and maximin Latin hypercube designs.
//! * [`driver`] — the sequential optimization loop.
//! * [`bench`] — built-in test functions, replication suites, and the
//!   stability diagnostic.

pub mod acquisition;
pub mod bench;
pub mod design;
pub mod driver;
pub mod error;
pub mod gp;
pub mod hyper;
pub mod kernel;
pub mod special;
pub mod trend;

pub use acquisition::{
    ei_value, hei_value, sei_value, t_cdf, t_pdf, ucb_score, AcqMethod, AcqSpec, AcqState,
};
pub use bench::{
    all_builtins, builtin, derived_seed, run_suite, stability_trace, FminProvenance, GapRow,
    ReplicationStatus, StabilityPoint, SuiteEntry, SuiteResult, TestFunction,
};
pub use design::{maximin_lhd, min_pairwise_dist, Domain, LHD_RESTARTS};
pub use driver::{
    estimate_lengthscales, maximize_acquisition, pool_size, run_bo, run_bo_observed, stab_gamma,
    AcqChoice, InnerOptConfig, IterationRecord, Method, Objective, RunConfig, RunTrace,
    StabConstraint, ThetaEstimate, TrendChoice,
};
pub use error::{Error, Result};
pub use gp::{
    fit, hierarchical_posterior, posterior_variance_params, Dataset, FitStats, GpFit, HierPrior,
    PredictiveT,
};
pub use hyper::{
    dsd_estimate, log_marginal, log_marginal_grad, mmap_estimate, profile_b, DsdEstimate,
    HyperEstimate, HyperScheme, SearchOptions,
};
pub use kernel::{
    corr_matrix, CorrFactor, KernelFamily, KernelSpec, PairDiffs, NUGGET_DEFAULT, NUGGET_MAX,
};
pub use trend::{basis_count, select_order_bic, BicSelection, TrendModel};
