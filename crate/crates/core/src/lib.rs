//! Empirical-likelihood estimation of average treatment effects in randomized
//! trials with high-dimensional covariates.
//!
//! The pipeline: split each treatment arm into folds, fit outcome regressions
//! (lasso, SCAD, random forest) on fold complements, turn the cross-fitted
//! predictions into centered moment constraints, and reweight each arm by
//! empirical likelihood. The EL point estimate comes with a plug-in variance
//! that stays valid despite the machine-learning first stage. A Monte Carlo
//! harness reproduces the supporting simulation studies at configurable scale.

pub mod data;
pub mod el;
pub mod error;
pub mod estimators;
pub mod folds;
pub mod linalg;
pub mod normal;
pub mod nuisance;
pub mod predictions;
pub mod screening;
pub mod seed;
pub mod simulate;

pub use data::TrialDataset;
pub use error::{Error, Result};
pub use estimators::{
    diff_in_means, mdel_estimate, mdel_report, mdel_variance, nosplit_el, wald_ci,
    EstimateReport, Interval,
};
pub use folds::{make_fold_plan, FoldPlan};
pub use nuisance::{fit_nuisances_crossfit, ModelKind, NuisanceModelSpec};
pub use predictions::NuisancePredictions;
pub use simulate::{monte_carlo_run, Design, EstimatorRequest, MetricsRow, SimulationSpec};
