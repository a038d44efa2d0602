//! Conditional predictive inference for data with group symmetries.
//!
//! A prediction set for an unobserved response is built by fitting a
//! threshold function with weighted quantile regression over the orbit of
//! the data under its symmetry group, then keeping every candidate response
//! whose score falls under its own fitted threshold.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod dual;
pub mod error;
pub mod group;
pub mod harness;
pub mod quantile;
pub mod region;
pub mod symmetry;

pub use dual::{
    lambda_test_curve, solve_dual, threshold_by_bisection, Bisection, ConjugateSpec, DualProblem,
    DualSolution,
};
pub use error::{Error, Result};
pub use group::{Coset, GroupElement, GroupSpec, NestedElement, Permutation};
pub use quantile::{
    fit_constant, fit_kernel, fit_linear, pinball, weighted_quantile, FeatureMap, Fit, KernelSpec,
    ThresholdModel,
};
pub use region::{Method, ModelClass, PredictionInterval};
pub use symmetry::{
    build_orbit_problem, project, scores_from, DataLayout, LinearPredictor, OrbitProblem,
    Predictor, Projection, ScoreTransform,
};
