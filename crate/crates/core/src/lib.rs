//! Success-probability maximization over soft policy allocations.
//!
//! A population is split into `M` buckets and each bucket can be served by one
//! of `K` policies (policy `0` is the reference). Every (bucket, policy) cell
//! carries the mean and covariance of its total outcome, either `value` alone
//! or `(value, cost)`. An [`Allocation`](model::Allocation) mixes policies per
//! bucket; the total outcome under an allocation is approximated by a Gaussian
//! whose mean and covariance are linear in the allocation weights, and the
//! optimizer climbs the probability that this Gaussian lands in a
//! [`SuccessRegion`](criterion::SuccessRegion).
//!
//! The numerical core is generic over the scalar type through [`Scalar`]
//! (`f32` and `f64`); the `*F64` aliases below are what the rest of the
//! workspace uses.

pub mod baselines;
pub mod bvn;
pub mod criterion;
pub mod error;
pub mod gradient;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use baselines::{
    bruteforce, greedy_1d, greedy_value, linprog_mckp, mixedint_mckp, KnapsackProblem,
    KnapsackSolution,
};
pub use bvn::{bvn_cdf, bvn_pdf};
pub use criterion::{
    criterion_closed_form, criterion_monte_carlo, normal_pdf, phi, success_probability,
    CriterionMethod, CriterionValue, SuccessRegion,
};
pub use gradient::{
    grad_closed_form, grad_finite_diff, grad_lemma1, grad_lemma1_on_draws,
    score_gradient_single_bucket_1d, GradientEstimate, GradientMethod,
};
pub use model::{
    mixture_params, sample_outcome, Allocation, MixtureParams, OutcomeSample, PolicyCellStats,
    ProblemShape,
};
pub use optimizer::{
    explore_init, project_allocation, project_simplex, run, GradientBackend, InitStrategy,
    OptResult, OptimizerConfig,
};

pub type AllocationF64 = Allocation<f64>;
pub type AllocationF32 = Allocation<f32>;
pub type PolicyCellStatsF64 = PolicyCellStats<f64>;
pub type PolicyCellStatsF32 = PolicyCellStats<f32>;
pub type MixtureParamsF64 = MixtureParams<f64>;
pub type MixtureParamsF32 = MixtureParams<f32>;
pub type SuccessRegionF64 = SuccessRegion<f64>;
pub type SuccessRegionF32 = SuccessRegion<f32>;
pub type CriterionValueF64 = CriterionValue<f64>;
pub type GradientEstimateF64 = GradientEstimate<f64>;
pub type OptimizerConfigF64 = OptimizerConfig<f64>;
pub type OptResultF64 = OptResult<f64>;
pub type KnapsackProblemF64 = KnapsackProblem<f64>;
pub type KnapsackSolutionF64 = KnapsackSolution<f64>;
