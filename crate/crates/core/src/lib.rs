//! Bounded-rational channels regularized by f-divergences, their endogenous
//! hedges and certificates, loss/information frontiers, tail transfer, and
//! black-box recovery of the operating path.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`);
//! aliases for `f64` are provided at the crate root.

// `!(x > 0)` is used on purpose so NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod ext;
pub mod frontier;
pub mod generators;
pub mod hedge;
pub mod learning;
mod linalg;
pub mod probe;
pub mod problem;
pub mod scalar;
pub mod seed;
pub mod solver;
pub mod table;
pub mod tails;

pub use error::{Error, Result};
pub use ext::Ext;
pub use frontier::{geometric_grid, pareto_check, project, trace, FrontierCurve, OperatingPoint};
pub use generators::{Generator, GeneratorKind};
pub use hedge::{
    adversarial_penalty, certificate, effective_loss_grid, indifference_residual, marginal_correction,
    optimal_perturbation, unused_action_slack, IndifferenceReport, PerturbationTable, SUPPORT_EPS,
};
pub use problem::{divergence, expected_loss, f_mutual_information, induced_marginal, Channel, DiscreteProblem, Labels};
pub use scalar::Scalar;
pub use solver::{free_energy, per_stimulus_response, solve_f, solve_kl, Init, SolveConfig, SolveReport, StepRule};
pub use table::Table;
pub use tails::{binary_divergence, event_probabilities, product_tail_bound, tail_bound, tail_transfer, TailBound, TailQuery};

pub type GeneratorF64 = Generator<f64>;
pub type GeneratorF32 = Generator<f32>;
pub type ProblemF64 = DiscreteProblem<f64>;
pub type ProblemF32 = DiscreteProblem<f32>;
pub type ChannelF64 = Channel<f64>;
pub type ChannelF32 = Channel<f32>;
pub type SolveConfigF64 = SolveConfig<f64>;
pub type SolveReportF64 = SolveReport<f64>;
